"""Exception types raised across the package."""


class MeteorflowError(Exception):
    """Base class for all package errors."""


class GeometryMismatchError(MeteorflowError, ValueError):
    pass


class InsufficientDataError(MeteorflowError, ValueError):
    pass


class DegenerateGeometryError(MeteorflowError, ValueError):
    pass


class ContractViolationError(MeteorflowError, RuntimeError):
    pass


class GraphCycleError(MeteorflowError):
    pass


class BindingError(MeteorflowError):
    pass


class SocketTypeError(MeteorflowError, TypeError):
    pass


class ReplicationError(MeteorflowError):
    """A stage containing a stateful task was asked to be replicated."""


class ConfigError(MeteorflowError, ValueError):
    pass


class TaskFailedError(MeteorflowError):
    def __init__(self, task_name, cause):
        super().__init__(f"task {task_name!r} failed: {cause!r}")
        self.task_name = task_name
        self.cause = cause


class PGMFormatError(MeteorflowError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class SceneError(MeteorflowError, ValueError):
    pass
