"""Erros do laboratório. O código de saída do CLI é decidido pela classe."""


class ConfigError(ValueError):
    """Erro de sintaxe ou de schema no arquivo de configuração."""


class NumericalError(RuntimeError):
    """Falha numérica (não convergência, overflow, resultado inconclusivo)."""


class InconclusiveCountError(NumericalError):
    pass


class DegenerateCriticalPointError(NumericalError):
    pass


class ResolutionError(NumericalError):
    pass
