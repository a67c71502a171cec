from spn_toolkit.parsers.image_files import ImageFormat, load_dataset, read_csv_image, read_pgm, write_csv_image
from spn_toolkit.parsers.model_file import ModelFile, parse_model, read_model, serialize_model, write_model

__all__ = [
    "ImageFormat",
    "ModelFile",
    "load_dataset",
    "parse_model",
    "read_csv_image",
    "read_model",
    "read_pgm",
    "serialize_model",
    "write_csv_image",
    "write_model",
]
