"""
Does a structured mask help the search start?
=============================================

The surrogate's group-sparse perturbation picks candidate pixels; the
annealer then starts from their inverted colors instead of random tuples.
"""
import sys
import tempfile

import numpy as np

from fewpixel.harness import CampaignConfig, run_ablation
from fewpixel.models import TinyClassifier, train
from fewpixel.models.shapes import train_test_split
from fewpixel.strmask import eligible_pixels, structured_mask

(x_train, y_train), (x_test, y_test) = train_test_split(seed=0)
if len(sys.argv) > 1:
    model = TinyClassifier.load(sys.argv[1])
else:
    model, _ = train(x_train, y_train, seed=0)

keep = np.flatnonzero(model.predict(x_test) == y_test)[:20]
images, labels = x_test[keep], y_test[keep]

mask = structured_mask(model, images[0], int(labels[0]))
print("first image:", len(eligible_pixels(mask)), "eligible pixels of", 32 * 32)

with tempfile.TemporaryDirectory() as out:
    cfg = CampaignConfig(pixels=5, budget=1000, count=len(images), seed=0, workers=4, out_dir=out)
    print(run_ablation(cfg, images, labels, model).table())
