"""Serializing problem instances for reproducible experiments.

A (channel, training) pair round-trips through the JSON instance format;
the training matrix is rebuilt from its kind and seed rather than stored.
"""

import io
import os

import numpy as np

from chanest import (SystemDims, gen_sparse_channel, load_instance,
                     make_training, save_instance)

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

dims = SystemDims(n_r=8, n_t=16, t_blocks=16)
channel = gen_sparse_channel(dims, 0.05, value_var=10.0, seed=321)
training = make_training(dims, "random-sign", seed=11)

path = os.path.join(OUT, "instance.json")
with open(path, "w") as fh:
    save_instance(fh, channel, training, dims, seed=321)
print(f"wrote {path} ({os.path.getsize(path)} bytes)")

loaded_channel, loaded_training, loaded_dims, seed = load_instance(path)
print(f"dims back: {loaded_dims}, generator seed {seed}")
print(f"channel identical: {np.array_equal(loaded_channel.h_v, channel.h_v)}")
print(f"training identical: "
      f"{np.array_equal(loaded_training.s_block, training.s_block)}")

buf = io.StringIO()
save_instance(buf, channel, training, dims)
print(f"\nfirst lines of the format:")
for line in buf.getvalue().splitlines()[:6]:
    print(" ", line)
