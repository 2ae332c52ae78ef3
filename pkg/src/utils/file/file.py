import os
from pathlib import Path
from typing import List, Tuple, Union

from pydantic import BaseModel, Field

IMAGE_EXTENSIONS = {"png"}


class ImageFile(BaseModel):
    """An input image of the `attack` command."""
    path: str = Field(..., description="local path of the PNG")

    @property
    def name(self) -> str:
        return os.path.basename(self.path)


def infer_file_category(path: str) -> Tuple[str, str]:
    """
    Category of a path from its suffix.

    Return:
        - category: image or default
        - suffix with the dot, e.g. .png
    """
    _, ext_with_dot = os.path.splitext(os.path.basename(path))
    if not ext_with_dot:
        return "default", ""
    ext = ext_with_dot.lstrip(".").lower()
    return ("image" if ext in IMAGE_EXTENSIONS else "default"), ext_with_dot


def list_images(directory: Union[str, Path]) -> List[Path]:
    """PNG files directly inside `directory`, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"input directory not found: {directory}")
    files = [ImageFile(path=str(p)) for p in directory.iterdir() if p.is_file()]
    return sorted(Path(f.path) for f in files if infer_file_category(f.path)[0] == "image")
