"""Shared fixtures: the worked single-slot example dataset and the
hand-written High rule that the engine's documentation walks through."""

import pytest

from firewx.core import GeoPoint
from firewx.ingest import NodeRegistry, parse_csv

# One slot of readings at node 1: humid 85%, wind 23.3 m/s, 40 degrees.
# Offset 0 keeps the wall-clock time as the UTC sampling time.
FIG_CSV = """\
2012-01-02 12:00:00, relative_humidity, RH_1, SN_1, 85, %
2012-01-02 12:00:00, wind_speed, WS_1, SN_1, 23.3, m/s
2012-01-02 12:00:00, air_temperature, AT_1, SN_1, 40, °C
"""

# The canonical hand-written rule: a High event fires for a node and slot
# whose humidity, wind, and temperature all sit inside the closed box.
HIGH_RULE_TEXT = """\
# rule: paper_high
Construct {
  ?FireEvent_1 prov:atLocation ?node.
  ?FireEvent_1 prov:atTime ?T.
  ?FireEvent_1 rdf:type fwi:High.
}
Where{
  ?RH_OB1 ssn:ObservedProperty cf:relative_humidity.
  ?RH_OB1 ssn:ObservationSamplingTime ?T.
  ?RH_OB1 dul:unitOfMeasure unit:percent.
  ?RH_OB1 ssn:ObservedBy ?RH_Sensor1.
  ?RH_Sensor1 ssn:deployedOnPlatform ?node.
  ?RH_OB1 ssn:hasValue ?RH_OB1V.
  ?WS_OB1 ssn:ObservedProperty cf:wind_speed.
  ?WS_OB1 ssn:ObservationSamplingTime ?T.
  ?WS_OB1 dul:unitOfMeasure unit:meterPerSecond.
  ?WS_OB1 ssn:ObservedBy ?WS_Sensor1.
  ?WS_Sensor1 ssn:deployedOnPlatform ?node.
  ?WS_OB1 ssn:hasValue ?WS_OB1V.
  ?AT_OB1 ssn:ObservedProperty cf:air_temperature.
  ?AT_OB1 ssn:ObservationSamplingTime ?T.
  ?AT_OB1 dul:unitOfMeasure unit:degreeCelsius.
  ?AT_OB1 ssn:ObservedBy ?AT_Sensor1.
  ?AT_Sensor1 ssn:deployedOnPlatform ?node.
  ?AT_OB1 ssn:hasValue ?AT_OB1V.
  Filter(
    ?RH_OB1V>=80&&?RH_OB1V<=100&&
    ?WS_OB1V>=17.5&&?WS_OB1V<=24.4&&
    ?AT_OB1V>=32&&?AT_OB1V<=41)
}
"""


@pytest.fixture
def fig_csv():
    return FIG_CSV


@pytest.fixture
def fig_observations():
    return parse_csv(FIG_CSV, utc_offset_minutes=0)


@pytest.fixture
def high_rule_text():
    return HIGH_RULE_TEXT


@pytest.fixture
def one_node_registry():
    return NodeRegistry({"SN_1": GeoPoint(-28.23, 153.27)})
