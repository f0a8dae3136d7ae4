"""Labeled traffic synthesis for vehicular networks and the CAN bus."""

from .apps import APP_PROFILES, REGISTERED_PSID_SET, REGISTERED_PSIDS, AppProfile, get_profile
from .can import CanAttackSpec, CanScenarioConfig, gen_can_attacks, paper_can_config
from .network import (
    ATTACK_TAGS,
    NETWORK_CLASSES,
    GoodputSeries,
    gen_audio_exfil,
    gen_benign,
    gen_geo_wsmp_flood,
    gen_gps_tracking,
    gen_wsmp_flood,
    generate,
    goodput_series,
    record_class,
)
from .scenario import (
    PAPER_NETWORK_SCENARIOS,
    AppSpec,
    AttackSpec,
    ScenarioConfig,
    bundled_scenarios,
    get_scenario,
)
