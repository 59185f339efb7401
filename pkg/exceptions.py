"""Custom exceptions for the timing-matters application."""
from typing import Optional, Sequence


class TimingError(Exception):
    """Base exception for all timing-matters errors."""
    pass


class ShapeMismatchError(TimingError):
    """Raised when operand shapes are incompatible for an operation."""

    def __init__(self, operation: str, shapes: Sequence[tuple], message: Optional[str] = None):
        self.operation = operation
        self.shapes = tuple(tuple(s) for s in shapes)
        rendered = ' vs '.join(str(s) for s in self.shapes)
        self.message = message or f"Shape mismatch in {operation}: {rendered}"
        super().__init__(self.message)


class GraphError(TimingError):
    """Raised when the computation graph is used incorrectly."""

    def __init__(self, operation: str, message: Optional[str] = None):
        self.operation = operation
        self.message = message or f"Invalid graph usage in {operation}"
        super().__init__(self.message)


class MissingGradientError(TimingError):
    """Raised when an optimizer step finds parameters without gradients."""

    def __init__(self, names: Sequence[str], message: Optional[str] = None):
        self.names = list(names)
        preview = ', '.join(self.names[:5])
        if len(self.names) > 5:
            preview += f", ... ({len(self.names)} total)"
        self.message = message or f"Missing gradients for parameters: {preview}"
        super().__init__(self.message)


class VocabularyError(TimingError):
    """Raised when an index falls outside its vocabulary."""

    def __init__(self, field: str, index: int, size: int, message: Optional[str] = None):
        self.field = field
        self.index = index
        self.size = size
        self.message = message or f"Index {index} out of vocabulary for {field} (size {size})"
        super().__init__(self.message)


class RecordFormatError(TimingError):
    """Raised when a dataset row cannot be parsed."""

    def __init__(self, row: int, message: Optional[str] = None):
        self.row = row
        self.message = message or f"Malformed record at row {row}"
        super().__init__(self.message)


class RecordRangeError(TimingError):
    """Raised when a dataset field is outside its documented range."""

    def __init__(self, row: int, field: str, value, message: Optional[str] = None):
        self.row = row
        self.field = field
        self.value = value
        self.message = message or f"Row {row}: field '{field}' out of range ({value})"
        super().__init__(self.message)


class SchemaError(TimingError):
    """Raised when data does not match the expected schema tag or layout."""

    def __init__(self, expected: str, found: Optional[str] = None, message: Optional[str] = None):
        self.expected = expected
        self.found = found
        self.message = message or f"Expected {expected} data, found {found}"
        super().__init__(self.message)


class BinningError(TimingError):
    """Raised for unsupported bin counts or out-of-range times and bins."""

    def __init__(self, operation: str, message: Optional[str] = None):
        self.operation = operation
        self.message = message or f"Invalid binning request: {operation}"
        super().__init__(self.message)


class SplitError(TimingError):
    """Raised when a dataset cannot be partitioned."""

    def __init__(self, message: Optional[str] = None):
        self.message = message or "Dataset cannot be split"
        super().__init__(self.message)


class DataAccessError(TimingError):
    """Raised when a split partition is read out of protocol order."""

    def __init__(self, partition: str, message: Optional[str] = None):
        self.partition = partition
        self.message = message or f"Partition '{partition}' accessed out of order"
        super().__init__(self.message)


class GeneratorError(TimingError):
    """Raised when synthetic generation cannot satisfy its configuration."""

    def __init__(self, operation: str, message: Optional[str] = None):
        self.operation = operation
        self.message = message or f"Generation failed during {operation}"
        super().__init__(self.message)


class ConfigurationError(TimingError):
    """Raised when a configuration value is invalid."""

    def __init__(self, key: str, message: Optional[str] = None):
        self.key = key
        self.message = message or f"Invalid configuration for '{key}'"
        super().__init__(self.message)


class UnknownVariantError(ConfigurationError):
    """Raised for unknown model, ablation or sweep names."""

    def __init__(self, kind: str, name: str, valid: Sequence[str]):
        self.kind = kind
        self.name = name
        self.valid = list(valid)
        super().__init__(
            kind,
            f"Unknown {kind} '{name}'. Valid names: {', '.join(self.valid)}",
        )


class CheckpointIntegrityError(TimingError):
    """Raised when a checkpoint is unreadable or fails its digest check."""

    def __init__(self, path: str, message: Optional[str] = None):
        self.path = str(path)
        self.message = message or f"Checkpoint failed integrity check: {path}"
        super().__init__(self.message)


class TrainingError(TimingError):
    """Raised when training cannot proceed."""

    def __init__(self, operation: str, message: Optional[str] = None):
        self.operation = operation
        self.message = message or f"Training failed during {operation}"
        super().__init__(self.message)


class InsufficientDataError(TimingError):
    """Raised when a dataset is too small for the requested experiment."""

    def __init__(self, operation: str, message: Optional[str] = None):
        self.operation = operation
        self.message = message or f"Not enough data for {operation}"
        super().__init__(self.message)
