import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from utils.exceptions import ConfigError
from utils.logger import setup_logger

logger = setup_logger("reading_config")

SECTIONS = ("manifold", "morse", "deformation", "solver", "diagnostics", "output")


class LeitorConfig:
    """Lê o documento TOML de uma execução e separa as seções conhecidas."""

    def __init__(self, file_path=None, text=None):
        self.file_path = file_path
        self.text = text
        self.data = None

    def load_file(self):
        with open(self.file_path, "r", encoding="utf-8") as f:
            self.text = f.read()

    def parse_document(self):
        try:
            self.data = tomllib.loads(self.text)
        except tomllib.TOMLDecodeError as e:
            match = re.search(r"line (\d+)", str(e))
            line = match.group(1) if match else "?"
            logger.error(f"Erro de sintaxe no arquivo de configuração (linha {line}): {e}")
            raise ConfigError(f"Erro de sintaxe na linha {line}: {e}") from e

    def parse_sections(self):
        unknown = sorted(set(self.data) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"Seções desconhecidas: {', '.join(unknown)}")
        sections = {}
        for name in SECTIONS:
            section = self.data.get(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"'{name}' precisa ser uma seção [{name}]")
            sections[name] = section
        return sections

    def process_file(self):
        if self.text is None:
            self.load_file()
        self.parse_document()
        sections = self.parse_sections()
        logger.debug(f"Configuração lida: seções presentes {sorted(k for k in self.data)}")
        return sections
