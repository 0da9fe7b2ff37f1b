import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

SAMPLES = os.path.join(os.path.dirname(__file__), "..", "src", "conpro_hls", "samples")


def sample(name):
    with open(os.path.join(SAMPLES, name + ".cp")) as f:
        return f.read()
