"""Max-cut search quality as a function of depolarizing noise strength.

Density matrices represent mixed states exactly, so the global
depolarizing channel (inexpressible on state vectors) can be applied after
every circuit layer both during the search and when scoring the final
discretized circuit.
"""

from mixqas.harness import ExperimentConfig, run_experiment

cfg = ExperimentConfig.from_dict({
    "task": "maxcut",
    "n": 6,
    "m": 9,
    "edge_prob": 0.5,
    "graph_seed": 3,
    "noise_kind": "depolarizing",
    "noise_grid": [0.0, 0.02, 0.05],
    "epochs": 600,
    "seeds": [0],
    "out_dir": "runs/demo_noise",
})

records = run_experiment(cfg)
print("noise level vs final metrics of the discretized circuit\n")
print("  p       E_m      P_m")
for rec in records:
    print(f"  {rec.noise_p:<6g}  {rec.final['E_m']:.4f}   {rec.final['P_m']:.4f}")
print("\nE_m decays with p: the channel mixes the output toward I/2^n, "
      "which halves every expectation gap")
print(f"per-noise-level summaries in {cfg.out_dir}/summary.csv")
