"""hsi-ingest: turn public MAT-file hyperspectral scenes into .hsc/.hsg files."""

__version__ = "0.1.0"

from .convert import ConversionError, convert
from .descriptors import DATASETS, DatasetDescriptor, match_descriptor
from .formats import read_hsc, read_hsg, write_hsc, write_hsg
from .verify import VerificationError, verify
