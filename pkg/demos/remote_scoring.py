"""
Scoring over HTTP
=================

Serve a model with the stub server and attack it through the remote
client. Scores arrive bit-identical to in-process inference.
"""
import numpy as np

from fewpixel.core import AttackConfig, AttackObjective, BudgetedModel
from fewpixel.gsa import anneal
from fewpixel.models import RemoteModel, StubServer, train
from fewpixel.models.shapes import train_test_split

(x_train, y_train), (x_test, y_test) = train_test_split(n_train=5000, seed=0)
model, _ = train(x_train, y_train, epochs=5, seed=0)

with StubServer(model) as server:
    remote = RemoteModel(server.url)
    print("served at", server.url)
    print("same scores:", np.array_equal(remote(x_test[0]), model(x_test[0])))

    cfg = AttackConfig(true_label=int(y_test[0]), pixels=5, budget=500, seed=0)
    objective = AttackObjective(x_test[0], BudgetedModel(remote, cfg.budget), cfg)
    anneal(objective, objective.bounds, rng=0)
    outcome = objective.outcome()
    print(f"success={outcome.success} calls={outcome.calls} http attempts={remote.attempts}")
