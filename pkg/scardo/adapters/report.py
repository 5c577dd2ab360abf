import logging
from pathlib import Path
from typing import Type

from pydantic import BaseModel

from .base import BaseWriter

logger = logging.getLogger(__name__)


class ReportJsonWriter(BaseWriter[BaseModel]):
    """JSON reports (comparison, sensitivity, validation summaries)."""

    def __init__(self, model: Type[BaseModel] = BaseModel) -> None:
        self.model = model

    def write(self, data: BaseModel, path: Path) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(data.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info("Wrote %s to %s", type(data).__name__, target)
        return target

    def read(self, path: Path) -> BaseModel:
        return self.model.model_validate_json(Path(path).read_text(encoding="utf-8"))
