"""Estimator covariance lower bounds without any Monte-Carlo simulation.

Prints the unstructured least-squares bound and the genie-aided sparse
bound (normalized to the NMSE scale) over an SNR sweep, for several
sparsity ratios. The spread between the two lines is the maximum payoff of
support detection.
"""

import numpy as np

from chanest import (SystemDims, crlb_lse, crlb_lse_smp, gen_sparse_channel,
                     make_training, nmse_bound_db, round_half_up,
                     snr_to_noise_var)

dims = SystemDims(n_r=32, n_t=64, t_blocks=64)
training = make_training(dims)
value_var = 10.0
snrs = np.arange(-10.0, 41.0, 10.0)

print(f"system {dims.n_r}x{dims.n_t}, t_blocks={dims.t_blocks}, "
      "orthogonal training\n")
header = "eta      L   " + "".join(f"{s:>8.0f}" for s in snrs) + "   (SNR dB)"

print("unstructured LS bound, NMSE dB:")
print(header)
for eta in (0.007, 0.031, 0.125, 0.5):
    n_on = round_half_up(eta * dims.size)
    row = []
    for snr in snrs:
        nv = snr_to_noise_var(training, dims, snr)
        _, trace = crlb_lse(training, nv, dims)
        row.append(nmse_bound_db(trace, n_on, value_var))
    print(f"{eta:<7.3g}{n_on:4d}  " + "".join(f"{v:8.1f}" for v in row))

print("\ngenie-aided sparse bound, NMSE dB:")
print(header)
for eta in (0.007, 0.031, 0.125, 0.5):
    n_on = round_half_up(eta * dims.size)
    support = gen_sparse_channel(dims, eta, seed=0).support
    row = []
    for snr in snrs:
        nv = snr_to_noise_var(training, dims, snr)
        _, trace = crlb_lse_smp(training, support, nv)
        row.append(nmse_bound_db(trace, n_on, value_var))
    print(f"{eta:<7.3g}{n_on:4d}  " + "".join(f"{v:8.1f}" for v in row))

nv = snr_to_noise_var(training, dims, 20.0)
_, t_lse = crlb_lse(training, nv, dims)
support = gen_sparse_channel(dims, 0.007, seed=0).support
_, t_smp = crlb_lse_smp(training, support, nv)
print(f"\nat 20 dB and eta=0.7%: sparsity is worth "
      f"{10 * np.log10(t_lse / t_smp):.1f} dB")
