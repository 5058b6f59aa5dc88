"""Validation of user-supplied input and output paths."""
import os
import re
from pathlib import Path
from typing import Optional, Sequence

from app.config import settings
from app.errors import ConfigError

CSV_EXTENSIONS = [".csv"]
SVG_EXTENSIONS = [".svg"]
JSON_EXTENSIONS = [".json"]


def validate_filename(filename: str, allowed_extensions: Optional[Sequence[str]] = None) -> str:
    """Validate a bare output file name.

    Args:
        filename: The filename to validate
        allowed_extensions: List of allowed file extensions (e.g., ['.csv', '.svg'])

    Returns:
        The filename (basename only)

    Raises:
        ConfigError: If the filename is empty, has path components or a wrong extension
    """
    if not filename:
        raise ConfigError("Filename cannot be empty")

    if '\0' in filename:
        raise ConfigError("Invalid filename: null bytes not allowed")

    if '/' in filename or '\\' in filename or filename in ('.', '..'):
        raise ConfigError(f"Invalid filename {filename!r}: directory components are not allowed")

    if not re.match(r'^[a-zA-Z0-9._-]+$', filename):
        raise ConfigError(
            f"Invalid filename {filename!r}: only alphanumeric characters, dots, dashes, and underscores allowed"
        )

    if allowed_extensions and not any(filename.endswith(ext) for ext in allowed_extensions):
        raise ConfigError(f"Invalid file extension for {filename!r}: allowed extensions are {list(allowed_extensions)}")

    return filename


def resolve_output_path(path: str, allowed_extensions: Optional[Sequence[str]] = None) -> Path:
    """Resolve an output path, creating its parent directory.

    Relative paths without a directory land in ``settings.output_path``.

    Raises:
        ConfigError: If the path is malformed or has a wrong extension
    """
    if not path or '\0' in path:
        raise ConfigError("Output path must be a non-empty string without null bytes")

    raw = Path(path)
    validate_filename(raw.name, allowed_extensions)
    has_directory = '/' in path or os.sep in path
    base = (raw.parent if has_directory else Path(settings.output_path)).expanduser().resolve()
    try:
        base.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Cannot create output directory {base}: {e}")
    return base / raw.name


def resolve_output_dir(path: Optional[str]) -> Path:
    """Resolve (and create) an output directory, defaulting to ``settings.output_path``."""
    if path is not None and '\0' in path:
        raise ConfigError("Output directory must not contain null bytes")
    directory = Path(path or settings.output_path).expanduser().resolve()
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Cannot create output directory {directory}: {e}")
    return directory


def resolve_input_path(path: str, allowed_extensions: Optional[Sequence[str]] = JSON_EXTENSIONS) -> Path:
    """Resolve an existing input file.

    Raises:
        ConfigError: If the file does not exist or has a wrong extension
    """
    if not path or '\0' in path:
        raise ConfigError("Input path must be a non-empty string without null bytes")
    resolved = Path(path).expanduser().resolve()
    if allowed_extensions and resolved.suffix not in allowed_extensions:
        raise ConfigError(f"Invalid file extension for {path!r}: allowed extensions are {list(allowed_extensions)}")
    if not resolved.is_file():
        raise ConfigError(f"File not found: {path}")
    return resolved
