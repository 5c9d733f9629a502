"""
Generate JSON Schemas of the experiment and run-metadata models for external tools.
"""

import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from src.mosar_models import ExperimentConfig, RunMetadata

SCHEMAS: dict[str, type[BaseModel]] = {
    "experiment_config_schema.json": ExperimentConfig,
    "run_metadata_schema.json": RunMetadata,
}


def generate_json_schema(output_dir: Path | None = None) -> dict[str, dict[str, Any]]:
    """Generate and save a JSON Schema per model; returns them keyed by file name"""
    output_dir = output_dir or Path(__file__).parent
    output_dir.mkdir(parents=True, exist_ok=True)
    schemas: dict[str, dict[str, Any]] = {}
    for filename, model in SCHEMAS.items():
        schema = model.model_json_schema()
        schema["$schema"] = "http://json-schema.org/draft-07/schema#"

        output_path = output_dir / filename
        with open(output_path, "w", encoding="utf-8") as f:
            json.dump(schema, f, indent=2)

        print(f"JSON Schema saved to: {output_path}")
        schemas[filename] = schema
    return schemas


if __name__ == "__main__":
    for name, schema in generate_json_schema().items():
        print(f"{name}: title={schema.get('title', 'N/A')}, required={schema.get('required', [])}")
