import importlib

import pytest

MODULES = [
    "logic.channel_model",
    "logic.errors",
    "logic.evaluation",
    "logic.learning",
    "logic.pilot_design",
    "logic.quantized_frontend",
    "logic.seeding",
    "logic.state_manager",
    "logic.sweep_processor",
    "ui.command_line",
    "utils.checkpoint_io",
    "utils.csv_export",
    "utils.dataset_io",
    "utils.excel_export",
    "utils.json_export",
    "utils.pdf_export",
    "utils.txt_export",
]


@pytest.mark.parametrize("name", MODULES)
def test_module_imports(name):
    assert importlib.import_module(name) is not None


def test_entry_point():
    from main import main
    assert callable(main)
