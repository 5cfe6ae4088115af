__VERSION__ = "0.1.0"
__COMMIT__ = "0000000"
