"""Rule DSL tests: parsing, canonical printing, and evaluation."""

import random

import pytest

from firewx import vocab
from firewx.core import DomainError
from firewx.ingest import parse_csv
from firewx.rules import (
    Rule,
    RuleSet,
    RuleSyntaxError,
    apply_rule,
    evaluate_ruleset,
    event_iri,
    parse_rule,
    parse_rules,
    rule_hits,
    serialize_rule,
    serialize_rules,
)
from firewx.store import (
    Comparison,
    IRI,
    Literal,
    Triple,
    TripleIndex,
    Var,
    observations_to_graph,
)

from conftest import FIG_CSV, HIGH_RULE_TEXT


def graphs_from_csv(csv, tag="test"):
    observations = parse_csv(csv, utc_offset_minutes=0)
    graphs = []
    for prop in ("relative_humidity", "wind_speed", "air_temperature"):
        batch = [o for o in observations if o.property.csv_name == prop]
        if batch:
            graphs.append(observations_to_graph(batch, context=f"urn:{tag}:{prop}"))
    return graphs


def fig_graphs():
    return graphs_from_csv(FIG_CSV, tag="fig")


class TestParse:
    def test_high_rule_shape(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        assert rule.name == "paper_high"
        assert len(rule.construct_templates) == 3
        assert len(rule.where_patterns) == 18
        assert len(rule.filters) == 6
        assert rule.event_var == "FireEvent_1"
        assert rule.location_var == "node"
        assert rule.time_var == "T"
        assert rule.class_iri == IRI(vocab.FWI + "High")
        assert rule.fwi_class().label == "high"

    def test_high_rule_filter_bounds(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        bounds = {(c.var, c.op): c.value for c in rule.filters}
        assert bounds[("RH_OB1V", ">=")] == 80
        assert bounds[("RH_OB1V", "<=")] == 100
        assert bounds[("WS_OB1V", ">=")] == 17.5
        assert bounds[("WS_OB1V", "<=")] == 24.4
        assert bounds[("AT_OB1V", ">=")] == 32
        assert bounds[("AT_OB1V", "<=")] == 41

    def test_predicates_resolved(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        predicates = {p.value for _, p, _ in rule.where_patterns}
        assert predicates == {
            vocab.SSN_OBSERVED_PROPERTY,
            vocab.SSN_OBSERVATION_SAMPLING_TIME,
            vocab.DUL_UNIT_OF_MEASURE,
            vocab.SSN_OBSERVED_BY,
            vocab.SSN_DEPLOYED_ON_PLATFORM,
            vocab.SSN_HAS_VALUE,
        }

    def test_a_abbreviates_rdf_type(self):
        text = (
            "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . ?E a fwi:Low . }\n"
            "WHERE { ?o ssn:ObservedBy ?s . ?s ssn:deployedOnPlatform ?n . "
            "?o ssn:ObservationSamplingTime ?t . }"
        )
        rule = parse_rule(text, default_name="abbrev")
        assert rule.class_iri == IRI(vocab.FWI + "Low")

    def test_keywords_case_insensitive(self, high_rule_text):
        lowered = high_rule_text.replace("Construct", "cOnStRuCt").replace(
            "Where", "WHERE"
        ).replace("Filter", "fIlTeR")
        assert parse_rule(lowered) == parse_rule(high_rule_text)

    def test_default_name_is_deterministic(self):
        text = (
            "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . ?E a fwi:Low . }\n"
            "WHERE { ?o ssn:ObservedBy ?s . ?s ssn:deployedOnPlatform ?n . "
            "?o ssn:ObservationSamplingTime ?t . }"
        )
        assert parse_rule(text).name == parse_rule(text).name
        assert parse_rule(text).name.startswith("r")

    def test_prefix_declaration(self):
        text = (
            "PREFIX ex: <http://example.org/>\n"
            "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . ?E a fwi:Low . }\n"
            "WHERE { ?o ex:by ?s . ?s ex:on ?n . ?o ssn:ObservationSamplingTime ?t . }"
        )
        rule = parse_rule(text, default_name="prefixed")
        assert (Var("o"), IRI("http://example.org/by"), Var("s")) in rule.where_patterns

    def test_multi_rule_document(self, high_rule_text):
        text = high_rule_text + "\n---\n" + high_rule_text.replace("paper_high", "second")
        ruleset = parse_rules(text)
        assert [r.name for r in ruleset] == ["paper_high", "second"]

    def test_duplicate_names_rejected(self, high_rule_text):
        with pytest.raises(DomainError, match="duplicate"):
            parse_rules(high_rule_text + "\n---\n" + high_rule_text)


class TestParseErrors:
    def test_syntax_error_carries_position(self):
        with pytest.raises(RuleSyntaxError) as info:
            parse_rule("CONSTRUCT {\n  ?E prov:atLocation @ .\n}")
        assert info.value.line == 2

    def test_missing_construct(self):
        with pytest.raises(RuleSyntaxError, match="expected CONSTRUCT"):
            parse_rule("WHERE { ?a ?b ?c . }")

    def test_unknown_prefix(self):
        with pytest.raises(RuleSyntaxError, match="unknown prefix"):
            parse_rule(
                "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . ?E a bogus:X . }\n"
                "WHERE { ?o ssn:ObservedBy ?n . ?o ssn:ObservationSamplingTime ?t . }"
            )

    def test_unbound_construct_var(self):
        with pytest.raises(DomainError, match="unbound"):
            parse_rule(
                "CONSTRUCT { ?E prov:atLocation ?ghost . ?E prov:atTime ?t . ?E a fwi:Low . }\n"
                "WHERE { ?o ssn:ObservationSamplingTime ?t . }",
                default_name="bad",
            )

    def test_event_var_must_be_fresh(self):
        with pytest.raises(DomainError, match="fresh"):
            parse_rule(
                "CONSTRUCT { ?o prov:atLocation ?n . ?o prov:atTime ?t . ?o a fwi:Low . }\n"
                "WHERE { ?o ssn:ObservedBy ?n . ?o ssn:ObservationSamplingTime ?t . }",
                default_name="bad",
            )

    def test_construct_must_be_event_shape(self):
        with pytest.raises(DomainError, match="atLocation/atTime/type"):
            parse_rule(
                "CONSTRUCT { ?E ssn:hasValue ?t . ?E prov:atTime ?t . ?E a fwi:Low . }\n"
                "WHERE { ?o ssn:ObservedBy ?n . ?o ssn:ObservationSamplingTime ?t . }",
                default_name="bad",
            )

    def test_class_must_be_fwi_iri(self):
        with pytest.raises(DomainError, match="fwi: class"):
            parse_rule(
                "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . ?E a ssn:Sensor . }\n"
                "WHERE { ?o ssn:ObservedBy ?n . ?o ssn:ObservationSamplingTime ?t . }",
                default_name="bad",
            )

    def test_unknown_class_name(self):
        with pytest.raises(DomainError, match="unknown fire-weather class"):
            parse_rule(
                "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . ?E a fwi:Volcanic . }\n"
                "WHERE { ?o ssn:ObservedBy ?n . ?o ssn:ObservationSamplingTime ?t . }",
                default_name="bad",
            )

    def test_unbound_filter_var(self):
        with pytest.raises(DomainError, match="filter variable"):
            parse_rule(
                "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . ?E a fwi:Low . }\n"
                "WHERE { ?o ssn:ObservedBy ?n . ?o ssn:ObservationSamplingTime ?t . "
                "FILTER(?missing >= 3) }",
                default_name="bad",
            )

    def test_contradictory_filter(self):
        with pytest.raises(DomainError, match="empty interval"):
            parse_rule(
                "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . ?E a fwi:Low . }\n"
                "WHERE { ?o ssn:ObservedBy ?n . ?o ssn:ObservationSamplingTime ?t . "
                "?o ssn:hasValue ?v . FILTER(?v >= 10 && ?v < 10) }",
                default_name="bad",
            )

    def test_equal_bounds_inclusive_ok(self):
        rule = parse_rule(
            "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . ?E a fwi:Low . }\n"
            "WHERE { ?o ssn:ObservedBy ?n . ?o ssn:ObservationSamplingTime ?t . "
            "?o ssn:hasValue ?v . FILTER(?v >= 10 && ?v <= 10) }",
            default_name="point",
        )
        assert len(rule.filters) == 2

    def test_wrong_template_count(self):
        with pytest.raises(DomainError, match="exactly 3"):
            parse_rule(
                "CONSTRUCT { ?E prov:atTime ?t . ?E a fwi:Low . }\n"
                "WHERE { ?o ssn:ObservationSamplingTime ?t . }",
                default_name="bad",
            )


class TestSerialize:
    def test_round_trip_fixed_point(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        text = serialize_rule(rule)
        again = parse_rule(text)
        assert again == rule
        assert serialize_rule(again) == text

    def test_whitespace_canonicalization(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        canonical = serialize_rule(rule)
        rng = random.Random(11)
        for _ in range(10):
            mangled = []
            for token in canonical.replace("\n", " \n ").split(" "):
                mangled.append(token)
                if rng.random() < 0.3:
                    mangled.append(" " * rng.randint(1, 3))
            reparsed = parse_rule(" ".join(mangled))
            assert serialize_rule(reparsed) == canonical

    def test_comments_ignored(self, high_rule_text):
        commented = high_rule_text.replace(
            "Where{", "# threshold block follows\nWhere{"
        )
        assert parse_rule(commented) == parse_rule(high_rule_text)

    def test_number_formatting(self):
        rule = parse_rule(
            "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . ?E a fwi:Low . }\n"
            "WHERE { ?o ssn:ObservedBy ?n . ?o ssn:ObservationSamplingTime ?t . "
            "?o ssn:hasValue ?v . FILTER(?v >= 17.50 && ?v < 80.0) }",
            default_name="fmt",
        )
        text = serialize_rule(rule)
        assert "17.5" in text and "17.50" not in text
        assert "80" in text and "80.0" not in text

    def test_multi_rule_round_trip(self, high_rule_text):
        ruleset = parse_rules(
            high_rule_text + "\n---\n" + high_rule_text.replace("paper_high", "second")
        )
        assert parse_rules(serialize_rules(ruleset)) == ruleset

    def test_checksum_stable_and_sensitive(self, high_rule_text):
        one = parse_rules(high_rule_text)
        same = parse_rules(high_rule_text)
        other = parse_rules(high_rule_text.replace("fwi:High", "fwi:Low"))
        assert one.checksum() == same.checksum()
        assert one.checksum() != other.checksum()


class TestApply:
    def test_worked_example_constructs_event(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        triples = apply_rule(rule, fig_graphs())
        assert len(triples) == 3
        subjects = {t.s for t in triples}
        assert len(subjects) == 1
        event = subjects.pop()
        assert event.value.startswith(vocab.EVENT_BASE)
        by_predicate = {t.p.value: t.o for t in triples}
        assert by_predicate[vocab.PROV_AT_LOCATION] == IRI(vocab.node_iri("SN_1"))
        assert by_predicate[vocab.PROV_AT_TIME] == Literal("2012-01-02T12:00:00Z", "dateTime")
        assert by_predicate[vocab.RDF_TYPE] == IRI(vocab.FWI + "High")

    def test_event_iri_deterministic(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        first = apply_rule(rule, fig_graphs())
        second = apply_rule(rule, fig_graphs())
        assert first == second

    def test_event_iri_depends_on_rule_name(self):
        node = IRI(vocab.node_iri("SN_1"))
        assert event_iri("a", node, "2012-01-02T12:00:00Z") != event_iri(
            "b", node, "2012-01-02T12:00:00Z"
        )

    def test_no_match_when_conjunct_missing(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        graphs = fig_graphs()[:2]  # drop air temperature
        assert apply_rule(rule, graphs) == set()

    def test_filter_boundary_inclusive(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        csv = FIG_CSV.replace("85", "80").replace("23.3", "17.5").replace("40", "32")
        assert len(apply_rule(rule, graphs_from_csv(csv))) == 3

    def test_filter_upper_bound_excludes(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        csv = FIG_CSV.replace("40", "41.1")
        assert apply_rule(rule, graphs_from_csv(csv)) == set()

    def test_two_slots_two_events(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        later = FIG_CSV.replace("12:00:00", "12:10:00")
        triples = apply_rule(rule, graphs_from_csv(FIG_CSV + later))
        assert len(triples) == 6
        assert len({t.s for t in triples}) == 2

    def test_hits_carry_class_and_time(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        hits = rule_hits(rule, fig_graphs())
        assert len(hits) == 1
        hit = hits[0]
        assert hit.node == IRI(vocab.node_iri("SN_1"))
        assert hit.time_lexical == "2012-01-02T12:00:00Z"
        assert hit.fwi_class().ontology_name == "Mid-High"


def tiny_rule(name, lo, hi, klass):
    return parse_rule(
        "CONSTRUCT { ?E prov:atLocation ?n . ?E prov:atTime ?t . "
        f"?E a fwi:{klass} . }}\n"
        "WHERE { ?o ssn:ObservedBy ?s . ?s ssn:deployedOnPlatform ?n . "
        "?o ssn:ObservationSamplingTime ?t . ?o ssn:hasValue ?v . "
        f"FILTER(?v >= {lo} && ?v < {hi}) }}",
        default_name=name,
    )


class TestEvaluateRuleset:
    def build_index(self, values):
        lines = []
        for i, value in enumerate(values):
            minute = (i % 6) * 10
            lines.append(
                f"2012-01-02 12:{minute:02d}:00, air_temperature, AT_1, SN_1, {value}, °C\n"
            )
        observations = parse_csv("".join(lines), utc_offset_minutes=0)
        return TripleIndex([observations_to_graph(observations, context="urn:test:t")])

    def test_matches_per_rule_application(self, high_rule_text):
        rules = [tiny_rule(f"band{i}", i * 10, (i + 1) * 10, "Low") for i in range(6)]
        rules.append(parse_rule(high_rule_text))
        index = TripleIndex(fig_graphs())
        grouped = evaluate_ruleset(rules, index)
        singly = [hit for rule in rules for hit in rule_hits(rule, index)]
        as_tuples = lambda hits: sorted(
            (h.rule.name, h.node.value, h.time_lexical) for h in hits
        )
        assert as_tuples(grouped) == as_tuples(singly)

    def test_vector_path_agrees_with_scalar(self):
        # 8 same-shape rules forces the numpy path; compare per-rule runs
        rules = [tiny_rule(f"band{i}", i * 5, (i + 1) * 5, "Low") for i in range(8)]
        index = self.build_index([1, 4.9, 5, 17, 22.5, 39.9])
        grouped = evaluate_ruleset(rules, index)
        singly = [hit for rule in rules for hit in rule_hits(rule, index)]
        as_tuples = lambda hits: sorted(
            (h.rule.name, h.node.value, h.time_lexical) for h in hits
        )
        assert as_tuples(grouped) == as_tuples(singly)
        assert len(grouped) == 6

    def test_shared_signature_single_match_run(self, monkeypatch):
        import firewx.rules as rules_module

        calls = []
        original = rules_module.match_bgp

        def counting(source, patterns, filters=()):
            calls.append(len(patterns))
            return original(source, patterns, filters)

        monkeypatch.setattr(rules_module, "match_bgp", counting)
        rules = [tiny_rule(f"band{i}", i * 5, (i + 1) * 5, "Low") for i in range(10)]
        evaluate_ruleset(rules, self.build_index([3, 12, 27]))
        assert len(calls) == 1

    def test_monotone_under_data_growth(self, high_rule_text):
        rule = parse_rule(high_rule_text)
        small = fig_graphs()
        grown = small + graphs_from_csv(
            FIG_CSV.replace("12:00:00", "13:00:00"), tag="extra"
        )
        assert apply_rule(rule, small) <= apply_rule(rule, grown)
