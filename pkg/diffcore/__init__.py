from diffcore.tensor import NonFiniteError, ShapeError, TapeError

__all__ = ['NonFiniteError', 'ShapeError', 'TapeError']
