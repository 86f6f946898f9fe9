"""Virtual-array DOA estimation: more carriers, finer resolution.

Matched-filtering K orthogonal carriers at an M_r-channel radar receiver
yields K*M_r virtual data elements. The demo measures, per carrier count:
  - the smallest MUSIC-resolvable two-source separation (bisection), and
  - single-source RMSE against the Cramer-Rao bound,
at fixed total transmit power, so each extra carrier also thins the power
per virtual element (the trade-off behind the model).
"""

import numpy as np

from dfrcbeam.virtualarray import DoaStudyConfig, doa_study

cfg = DoaStudyConfig(k_values=(1, 2, 4, 8), snr_db_values=(25.0,),
                     n_radar_rx=8, n_tx=16, n_trials=40,
                     n_resolution_trials=11, seed=1, power_mode="total")
rows = doa_study(cfg)

print("K   resolution threshold   RMSE        CRLB        RMSE/CRLB")
for r in rows:
    ratio_db = 20 * np.log10(r["rmse"] / r["crlb"])
    print(f"{r['k']:<3d} {r['delta_u_threshold']:^20.4f} "
          f"{r['rmse']:.3e}  {r['crlb']:.3e}  {ratio_db:+.2f} dB")

print("\nthe threshold shrinks as carriers are added (virtual aperture),")
print("while RMSE tracks the bound; columns match the doa.csv schema")
