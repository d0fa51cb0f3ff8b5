"""Shared builders for randomized test models, plus the acceptance summary."""

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from reachlip import Layer, Model

DATA = __file__.rsplit("/", 1)[0] + "/data"


def random_dense_net(rng, n_in, hidden, n_out, activation="tanh", scale=1.0):
    """Two-layer feedforward net with the given hidden activation."""
    layers = (
        Layer(
            "dense",
            activation=activation,
            params={
                "W": scale * rng.standard_normal((hidden, n_in)),
                "b": scale * rng.standard_normal(hidden),
            },
        ),
        Layer(
            "dense",
            activation="identity",
            params={
                "W": scale * rng.standard_normal((n_out, hidden)),
                "b": scale * rng.standard_normal(n_out),
            },
        ),
    )
    labels = tuple(f"c{i}" for i in range(n_out))
    return Model(input_arity=n_in, sequence_length=1, labels=labels, layers=layers)


def random_rnn(rng, frame, hidden, n_out, length, scale=0.6):
    cell = Layer(
        "recurrent-cell",
        activation="tanh",
        params={
            "W_x": scale * rng.standard_normal((hidden, frame)),
            "W_h": scale * rng.standard_normal((hidden, hidden)),
            "b": scale * rng.standard_normal(hidden),
        },
    )
    head = Layer(
        "dense",
        activation="identity",
        params={
            "W": scale * rng.standard_normal((n_out, hidden)),
            "b": scale * rng.standard_normal(n_out),
        },
    )
    labels = tuple(f"c{i}" for i in range(n_out))
    return Model(
        input_arity=frame * length, sequence_length=length, labels=labels, layers=(cell, head)
    )


def random_lstm(rng, frame, hidden, n_out, length, scale=0.6):
    params = {}
    for g in "ifoc":
        params[f"W_{g}"] = scale * rng.standard_normal((hidden, frame))
        params[f"U_{g}"] = scale * rng.standard_normal((hidden, hidden))
        params[f"b_{g}"] = scale * rng.standard_normal(hidden)
    cell = Layer("lstm-cell", params=params)
    head = Layer(
        "dense",
        activation="identity",
        params={
            "W": scale * rng.standard_normal((n_out, hidden)),
            "b": scale * rng.standard_normal(n_out),
        },
    )
    labels = tuple(f"c{i}" for i in range(n_out))
    return Model(
        input_arity=frame * length, sequence_length=length, labels=labels, layers=(cell, head)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
