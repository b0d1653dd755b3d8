"""
Annealing versus differential evolution
=======================================

Attack the same clean-correct test images with both optimizers under one
budget and print the summary table.
"""
import sys

import numpy as np

from fewpixel.harness import CampaignConfig, metrics_table, run_campaign
from fewpixel.models import TinyClassifier, train
from fewpixel.models.shapes import train_test_split

(x_train, y_train), (x_test, y_test) = train_test_split(seed=0)
if len(sys.argv) > 1:
    model = TinyClassifier.load(sys.argv[1])
else:
    model, _ = train(x_train, y_train, seed=0)

n = 20
keep = np.flatnonzero(model.predict(x_test) == y_test)[:n]
images, labels = x_test[keep], y_test[keep]

reports = {}
for method in ("gsa", "de"):
    cfg = CampaignConfig(method=method, pixels=5, budget=3000, count=n, seed=0, workers=4)
    reports[method.upper()] = run_campaign(cfg, images, labels, model).metrics

print(metrics_table(list(reports.items())))
