"""Command-line surface: synth, train, eval, gradcheck, warp, ablate."""
