"""Coupled pendulums: the spring force only sees q1 - q2, so the network should rotate
both position planes together and leave the momentum planes alone.

Run: python3 demos/pendulum_rates.py [epochs]   (default 40 epochs)
"""

import sys

import numpy as np

from hgamma import TrainConfig, create_model, generate, make_task, train
from hgamma.metrics import lambda_report

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 40
spec = make_task("pendulum", seed=0)
ds = generate(spec)
print(f"{len(ds)} samples, inputs in R^{spec.n}, targets (q1', q2', p1', p2')")
print("reference rates:", spec.lambda0)

model = create_model(spec.n, "son", out_dim=4, seed=0)
model, hist = train(model, ds.X, ds.Y, TrainConfig(epochs=epochs, seed=0))
print(f"validation MSE after {epochs} epochs: {hist.val_loss[-1]:.2e}")
print("learned rates:  ", np.round(model.rates, 4))
print("matched errors: ", np.round(lambda_report(model, spec.lambda0), 4))
