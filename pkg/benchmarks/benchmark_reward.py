import os

import numpy as np

from magclimb._adhesion import gate_codes
from magclimb._curriculum import CurriculumSchedule
from magclimb._reward import RewardInputs, compute_rewards


class RewardSuite:
    params = [256] if "PR" in os.environ else [256, 4096]

    def setup(self, n: int) -> None:
        rng = np.random.default_rng(0)
        q_nominal = np.tile([0.0, 0.8, -1.323599], 4)
        body_z = rng.normal(size=(n, 3))
        self.inputs = RewardInputs(
            command=rng.uniform(-0.5, 0.5, (n, 3)),
            lin_vel=rng.normal(0.0, 0.3, (n, 3)),
            ang_vel=rng.normal(0.0, 0.3, (n, 3)),
            phases=rng.uniform(0.0, 2 * np.pi, (n, 4)),
            foot_height=rng.uniform(-0.01, 0.12, (n, 4)),
            foot_vel=rng.normal(0.0, 0.2, (n, 4, 3)),
            contact=rng.uniform(size=(n, 4)) < 0.6,
            tau=rng.normal(0.0, 5.0, (n, 12)),
            q=q_nominal + rng.normal(0.0, 0.1, (n, 12)),
            qd=rng.normal(0.0, 1.0, (n, 12)),
            qdd=rng.normal(0.0, 10.0, (n, 12)),
            q_nominal=q_nominal,
            actions=rng.normal(size=(n, 16)),
            prev_actions=rng.normal(size=(n, 16)),
            prev2_actions=rng.normal(size=(n, 16)),
            magnet_actions=rng.uniform(size=(n, 4)),
            body_z=body_z / np.linalg.norm(body_z, axis=1, keepdims=True),
            reference_z=np.array([1.0, 0.0, 0.0]),
        )
        self.schedule = CurriculumSchedule().state(35000)
        self.gate = [rng.uniform(size=(n, 4)) for _ in range(4)] + [rng.uniform(0.0, 2e-3, (n, 4)), np.ones((n, 4))]

    def time_compute_rewards(self, _n: int) -> None:
        compute_rewards(self.inputs, self.schedule)

    def time_gate_codes(self, _n: int) -> None:
        gate_codes(*self.gate)
