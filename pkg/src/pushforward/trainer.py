from dataclasses import dataclass
from typing import Optional, Tuple, TypeVar

import equinox as eqx
import optax
from jaxtyping import PyTree
from optax import GradientTransformation, OptState


M = TypeVar("M", bound=PyTree)


@dataclass(frozen=True)
class OptimizerConfig:
    # Config for the critic optimizer (always adam)
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_grad_norm: Optional[float] = None

    min_lr_ratio: float = 0.0
    warmup: float = 0.0
    """fraction of training steps to use as warmup, or steps to use. 0.0 means no warmup"""
    lr_schedule: str = "constant"  # constant, cosine, linear
    cooldown: float = 0.0
    """fraction of training steps to use as a final linear decay to min_lr, or steps to use. 0.0 means no cooldown"""

    def build(self, num_train_steps: int) -> GradientTransformation:
        """Creates the optimizer"""

        # indirection makes it work with optax.inject_hyperparams so the current learning rate sits in the state
        def _optimizer(learning_rate):
            components = []

            if self.max_grad_norm:
                components.append(optax.clip_by_global_norm(self.max_grad_norm))

            components.append(optax.scale_by_adam(self.beta1, self.beta2, self.epsilon))

            # - learning rate for descent
            components.append(optax.scale(-learning_rate))

            return optax.chain(*components)

        return optax.inject_hyperparams(_optimizer)(learning_rate=self.lr_scheduler(num_train_steps))

    def lr_scheduler(self, num_train_steps: int):
        warmup_steps = _convert_ratio_or_steps(self.warmup, num_train_steps)
        cooldown_steps = _convert_ratio_or_steps(self.cooldown, num_train_steps)
        lr_decay_steps = max(num_train_steps - warmup_steps - cooldown_steps, 1)
        min_lr = self.learning_rate * self.min_lr_ratio

        match self.lr_schedule:
            case "constant":
                schedule = optax.constant_schedule(self.learning_rate)
            case "cosine":
                schedule = optax.cosine_decay_schedule(self.learning_rate, lr_decay_steps, self.min_lr_ratio)
            case "linear":
                schedule = optax.linear_schedule(self.learning_rate, min_lr, lr_decay_steps)
            case _:
                raise ValueError(f"Unknown lr_schedule: {self.lr_schedule}")

        schedules = []
        boundaries = []

        if warmup_steps != 0:
            schedules.append(optax.linear_schedule(0.0, self.learning_rate, warmup_steps))
            boundaries.append(warmup_steps)

        schedules.append(schedule)

        if cooldown_steps != 0:
            final_main_lr = schedule(lr_decay_steps)
            schedules.append(optax.linear_schedule(final_main_lr, min_lr, cooldown_steps))
            boundaries.append(num_train_steps - cooldown_steps)

        if len(schedules) > 1:
            schedule = optax.join_schedules(schedules, boundaries)

        return schedule


def _convert_ratio_or_steps(ratio_or_steps: float, num_train_steps: int):
    if ratio_or_steps < 1.0:
        return int(ratio_or_steps * num_train_steps)
    else:
        return int(ratio_or_steps)


def adam_step(params: M, grads: M, opt_state: OptState, optimizer: GradientTransformation) -> Tuple[M, OptState]:
    """One bias-corrected Adam update of `params`. Only the inexact-array leaves are touched."""
    trainable = eqx.filter(params, eqx.is_inexact_array)
    updates, opt_state = optimizer.update(eqx.filter(grads, eqx.is_inexact_array), opt_state, trainable)
    return eqx.apply_updates(params, updates), opt_state


def init_optimizer(params: PyTree, optimizer: GradientTransformation) -> OptState:
    return optimizer.init(eqx.filter(params, eqx.is_inexact_array))
