from __future__ import annotations

import pathlib

import pytest

SAMPLES = pathlib.Path(__file__).resolve().parent.parent / "samples"


@pytest.fixture(scope="session")
def chatbot_text() -> str:
    return (SAMPLES / "chatbot.dfd").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def chatbot_model(chatbot_text):
    from threatgen.dfd import parse_dfd

    return parse_dfd(chatbot_text)
