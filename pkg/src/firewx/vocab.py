"""IRI vocabulary for the observation and fire-weather graphs.

Predicate spellings follow the semantic-sensor-network style used by the
rule files (ssn:ObservedProperty, ssn:ObservationSamplingTime, ...); a
project namespace `fwi:` carries the classification lattice, minted
instances, and inferred events.
"""

from __future__ import annotations

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
XSD = "http://www.w3.org/2001/XMLSchema#"
SSN = "http://purl.oclc.org/NET/ssnx/ssn#"
CF = "http://purl.oclc.org/NET/ssnx/cf/cf-property#"
DUL = "http://www.loa-cnr.it/ontologies/DUL.owl#"
UNIT = "http://qudt.org/vocab/unit#"
PROV = "http://www.w3.org/ns/prov#"
FWI = "http://firewx.example.org/fwi#"

PREFIXES = {
    "rdf": RDF,
    "xsd": XSD,
    "ssn": SSN,
    "cf": CF,
    "dul": DUL,
    "unit": UNIT,
    "prov": PROV,
    "fwi": FWI,
}

RDF_TYPE = RDF + "type"

SSN_OBSERVED_PROPERTY = SSN + "ObservedProperty"
SSN_OBSERVATION_SAMPLING_TIME = SSN + "ObservationSamplingTime"
SSN_OBSERVED_BY = SSN + "ObservedBy"
SSN_HAS_VALUE = SSN + "hasValue"
SSN_DEPLOYED_ON_PLATFORM = SSN + "deployedOnPlatform"

CF_AIR_TEMPERATURE = CF + "air_temperature"
CF_RELATIVE_HUMIDITY = CF + "relative_humidity"
CF_WIND_SPEED = CF + "wind_speed"

DUL_UNIT_OF_MEASURE = DUL + "unitOfMeasure"

UNIT_DEGREE_CELSIUS = UNIT + "degreeCelsius"
UNIT_PERCENT = UNIT + "percent"
UNIT_METER_PER_SECOND = UNIT + "meterPerSecond"

PROV_AT_LOCATION = PROV + "atLocation"
PROV_AT_TIME = PROV + "atTime"
PROV_WAS_GENERATED_BY = PROV + "wasGeneratedBy"
PROV_GENERATED_AT_TIME = PROV + "generatedAtTime"

XSD_DECIMAL = XSD + "decimal"
XSD_DATETIME = XSD + "dateTime"
XSD_STRING = XSD + "string"

# Instance-IRI bases for entities minted during ingest and inference.
NODE_BASE = FWI + "node/"
SENSOR_BASE = FWI + "sensor/"
OBSERVATION_BASE = FWI + "obs/"
EVENT_BASE = FWI + "event/"
RULE_BASE = FWI + "rule/"
GRAPH_BASE = "urn:graph:"


def property_iri(csv_name: str) -> str:
    """cf: feature-of-interest IRI for a sensor property."""
    return {
        "air_temperature": CF_AIR_TEMPERATURE,
        "relative_humidity": CF_RELATIVE_HUMIDITY,
        "wind_speed": CF_WIND_SPEED,
    }[csv_name]


def unit_iri(csv_name: str) -> str:
    return {
        "air_temperature": UNIT_DEGREE_CELSIUS,
        "relative_humidity": UNIT_PERCENT,
        "wind_speed": UNIT_METER_PER_SECOND,
    }[csv_name]


def node_iri(node_id: str) -> str:
    return NODE_BASE + node_id


def sensor_iri(sensor_id: str) -> str:
    return SENSOR_BASE + sensor_id


def expand(qname: str, prefixes: dict = PREFIXES) -> str:
    """Expand prefix:local to a full IRI; already-full IRIs pass through."""
    if qname.startswith(("http://", "https://", "urn:")):
        return qname
    prefix, sep, local = qname.partition(":")
    if sep and prefix in prefixes:
        return prefixes[prefix] + local
    raise ValueError(f"cannot expand {qname!r}: unknown prefix")


def compact(iri: str, prefixes: dict = PREFIXES) -> str:
    """Compact a full IRI to prefix:local where a base matches (longest wins)."""
    best = None
    for prefix, base in prefixes.items():
        if iri.startswith(base) and (best is None or len(base) > len(prefixes[best])):
            best = prefix
    if best is None:
        return iri
    return f"{best}:{iri[len(prefixes[best]):]}"
