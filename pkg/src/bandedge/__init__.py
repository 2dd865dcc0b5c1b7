"""Band-edge superradiance package.

Models and kernels (`models`, `kernel`), the Volterra steppers
(`volterra`), the dynamics modes (`lowexc`, `meanfield`, `quantum`,
`noise`), the explicit-bath reference (`bath_oracle`) and the run service
(`service`).
"""
