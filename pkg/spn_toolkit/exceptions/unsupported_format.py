# spn_toolkit/exceptions/unsupported_format.py

"""
Exception for on-disk data that the parsers cannot read.
"""

from spn_toolkit.exceptions.spn_errors import InputError


class UnsupportedFormat(InputError):
    """
    Exception raised when an image or model file is not in a supported format.

    Attributes:
        message -- explanation of the error, naming the file
    """

    def __init__(self, message="Input is not in a supported image or model format"):
        super().__init__(message)
