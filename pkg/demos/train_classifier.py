"""
Training the shapes classifier
==============================

Generate the synthetic disk/square/cross images, fit the small MLP and
save its weights in the TNN1 format used by every other tool here.
"""
import sys

from fewpixel.models import train
from fewpixel.models.shapes import CLASS_NAMES, train_test_split

out = sys.argv[1] if len(sys.argv) > 1 else "shapes.tnn"

(x_train, y_train), (x_test, y_test) = train_test_split(seed=0)
print("train", x_train.shape, "test", x_test.shape, "classes", CLASS_NAMES)

# SGD with momentum; takes roughly ten seconds on a laptop
model, report = train(x_train, y_train, test=(x_test, y_test), seed=0)
print(f"train accuracy {report.train_accuracy:.3f}, test accuracy {report.test_accuracy:.3f}")

model.save(out)
print("weights written to", out)
