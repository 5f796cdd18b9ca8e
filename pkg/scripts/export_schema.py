import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from models.schemas import RunReport  # noqa: E402

SCHEMA_PATH = Path(__file__).resolve().parents[1] / "report.schema.json"


def export_schema(path: Path = SCHEMA_PATH):
    """Regenerate the published run report schema from the RunReport model"""
    schema = RunReport.model_json_schema(mode="serialization")
    schema["$schema"] = "https://json-schema.org/draft/2020-12/schema"
    path.write_text(json.dumps(schema, indent=2) + "\n")
    print(f"Wrote {path}")


if __name__ == "__main__":
    export_schema()
