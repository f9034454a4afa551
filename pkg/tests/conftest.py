import pytest

from groupattr.harness import (
    ArchSpec,
    DatasetSpec,
    ElboSpec,
    ExperimentConfig,
    QuerySpec,
    ScheduleSpec,
    TrainSpec,
    UnlearnSpec,
)


def tiny_experiment_config(master_seed: int = 7, **overrides) -> ExperimentConfig:
    """A seconds-scale pipeline configuration for harness and CLI tests."""
    from dataclasses import replace

    cfg = ExperimentConfig(
        dataset=DatasetSpec(n_groups=3, samples_per_group=40, dim=2, radius=5.0,
                            noise_std=0.3, conditional=True, descriptor_dim=4),
        schedule=ScheduleSpec(num_steps=40, kind="squared_cosine"),
        arch=ArchSpec(hidden_dims=(32, 32), time_embed_dim=8),
        train=TrainSpec(epochs=6, batch_size=16, lr=1e-3, exposure_matched=True),
        unlearn_methods=(
            UnlearnSpec(method="retrack", steps_or_epochs=10, lr=1e-4,
                        kl_cap=100.0, timestep_range=(1, 40), batch_size=16),
            UnlearnSpec(method="esd", steps_or_epochs=10, lr=3e-4, lambda_forget=0.3,
                        timestep_range=(1, 40), batch_size=16),
        ),
        queries=QuerySpec(count=6, clip_x0=8.0),
        elbo=ElboSpec(stride=8),
        master_seed=master_seed,
    )
    return replace(cfg, **overrides) if overrides else cfg


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory):
    """One fully executed tiny pipeline, shared read-only across tests."""
    from groupattr.harness import run_experiment

    out = tmp_path_factory.mktemp("tiny_run")
    cfg = tiny_experiment_config()
    summary = run_experiment(cfg, out)
    return cfg, out, summary
