class DataError(Exception):
    """Input data violates the format or value range this toolkit expects."""
