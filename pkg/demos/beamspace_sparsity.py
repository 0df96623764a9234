"""Why beamspace channels are sparse.

Builds a multipath channel whose departure/arrival angles sit on the DFT
beam grid, maps it into beamspace and shows that the dense antenna-domain
matrix collapses to a handful of isolated coefficients.
"""

import numpy as np

from chanest import (PathParams, SystemDims, VirtualBasis, beam_angle,
                     geometric_channel, virtual_map, virtual_unmap)

rng = np.random.default_rng(1)

dims = SystemDims(n_r=16, n_t=32, t_blocks=32)
basis = VirtualBasis.for_dims(dims)

# four scatterers, each on a distinct (receive beam, transmit beam) pair
beams = [(2, 5), (9, 17), (4, 30), (12, 11)]
paths = [PathParams(gain=complex(rng.normal(), rng.normal()),
                    aod=beam_angle(j, dims.n_t),
                    aoa=beam_angle(i, dims.n_r))
         for i, j in beams]

h = geometric_channel(dims, paths)
h_v = virtual_map(h, basis)

print(f"antenna-domain channel: {dims.n_r} x {dims.n_t}, "
      f"{np.count_nonzero(np.abs(h) > 1e-8)} entries above 1e-8")
print(f"beamspace channel:      {dims.n_r} x {dims.n_t}, "
      f"{np.count_nonzero(np.abs(h_v) > 1e-8)} entries above 1e-8")

print("\nbeamspace support (row = receive beam, col = transmit beam):")
for i, j in sorted(beams):
    print(f"  ({i:2d}, {j:2d})  magnitude {abs(h_v[i, j]):.3f}")

round_trip = virtual_unmap(h_v, basis)
print(f"\nround-trip error |W_r H_v W_t^H - H| = "
      f"{np.max(np.abs(round_trip - h)):.2e}")

# off the beam grid the energy smears over many beams instead
smeared = geometric_channel(dims, [PathParams(1.0, 0.83, 2.41)])
sm_v = virtual_map(smeared, basis)
print(f"\noff-grid path for comparison: "
      f"{np.count_nonzero(np.abs(sm_v) > 1e-3 * np.abs(sm_v).max())} beams "
      "carry >0.1% of the peak magnitude")
