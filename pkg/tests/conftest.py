import pytest

from eeecoal import EeeParams, FixedSize, Poisson, TrafficSpec

# 5 Gb/s of 1500-byte frames on a 10 Gb/s line: the reference operating point
LAM_5G = 5000.0 / 12000.0        # frames/us
MU_10G_1500B = 1.0 / 1.2         # frames/us
W0_5G = 3.0                      # baseline delay at that point, us


@pytest.fixture
def params():
    return EeeParams()


@pytest.fixture
def poisson_1500(request):
    def make(rate_gbps: float) -> TrafficSpec:
        lam = rate_gbps * 1000.0 / 12000.0
        return TrafficSpec(arrival=Poisson(lam), sizes=FixedSize(1500))
    return make


def lam_for_rate(rate_gbps: float, frame_bytes: int = 1500) -> float:
    return rate_gbps * 1000.0 / (8.0 * frame_bytes)
