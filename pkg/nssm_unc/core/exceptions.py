"""Error hierarchy shared by the library and the CLI.

Each subclass fixes a machine-parsable category and the exit code the CLI
returns for it.
"""


class NssmUncError(Exception):
    category: str = "error"
    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def one_line(self) -> str:
        return f"error[{self.category}]: {self.detail}"


class ConfigError(NssmUncError):
    category = "config"
    exit_code = 2


class ArtifactIOError(NssmUncError):
    category = "io"
    exit_code = 3


class DatasetFormatError(NssmUncError):
    category = "format"
    exit_code = 4

    def __init__(self, path: str, line: int, detail: str, field: str | None = None):
        where = f"{path}:{line}" + (f" field '{field}'" if field else "")
        super().__init__(f"{where}: {detail}")
        self.path = path
        self.line = line
        self.field = field


class SimulationDivergedError(NssmUncError):
    category = "divergence"
    exit_code = 5

    def __init__(self, step: int, context: str = ""):
        suffix = f" ({context})" if context else ""
        super().__init__(f"non-finite state at step {step}{suffix}")
        self.step = step


class NumericalError(NssmUncError):
    category = "numerical"
    exit_code = 6


class ProvenanceError(NssmUncError):
    category = "provenance"
    exit_code = 7


class MissingStageError(NssmUncError):
    category = "missing-stage"
    exit_code = 8

    def __init__(self, stage: str, path: str):
        super().__init__(f"missing artifact {path}; run `nssm-unc {stage}` first")
        self.stage = stage
        self.path = path
