import pytest

from spiralflow.acceptance import Context


@pytest.fixture(scope="session")
def ctx():
    """Shared steady data: lambda, matched trajectory and profiles."""
    return Context()


@pytest.fixture(scope="session")
def lam(ctx):
    return ctx.lam


@pytest.fixture(scope="session")
def traj(ctx):
    return ctx.traj


@pytest.fixture(scope="session")
def profile(ctx):
    return ctx.profile100
