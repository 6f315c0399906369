import sys

import numpy as np
import pytest
from PySide6.QtCore import QCoreApplication, QtMsgType, qInstallMessageHandler

from catising.operators import FockSpace


@pytest.fixture(scope="session", autouse=True)
def qapp():
    app = QCoreApplication.instance() or QCoreApplication(sys.argv[:1])
    yield app


@pytest.fixture
def qt_messages():
    """(level, text) of every qDebug/qInfo/qWarning issued during the test."""
    messages: list[tuple[QtMsgType, str]] = []

    def handler(mode, context, message):
        messages.append((mode, message))

    previous = qInstallMessageHandler(handler)
    yield messages
    qInstallMessageHandler(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def space():
    return FockSpace(30)


@pytest.fixture
def random_density(rng):
    def make(dim: int) -> np.ndarray:
        A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = A @ A.conj().T
        return rho / np.trace(rho).real

    return make
