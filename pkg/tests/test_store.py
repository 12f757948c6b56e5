import itertools
import random
from datetime import timedelta

import pytest
from hypothesis import given, settings, strategies as st

from firewx import vocab
from firewx.core import DomainError, PropertyKind, TimeRange, parse_utc
from firewx.ingest import Observation, parse_csv
from firewx.store import (
    CatalogEntry,
    Comparison,
    IRI,
    Literal,
    NamedGraph,
    RepositorySet,
    Triple,
    TripleIndex,
    Var,
    decode_quad,
    decode_term,
    encode_quad,
    encode_term,
    graph_time_extrema,
    match_bgp,
    observations_to_graph,
)


def obs(time, kind, sensor, node, value):
    return Observation(
        time=parse_utc(time),
        property=kind,
        sensor_id=sensor,
        node_id=node,
        value=value,
        unit=kind.unit,
    )


AT = PropertyKind.AIR_TEMPERATURE
RH = PropertyKind.RELATIVE_HUMIDITY
WS = PropertyKind.WIND_SPEED


class TestTerms:
    def test_empty_iri_rejected(self):
        with pytest.raises(DomainError):
            IRI("")

    def test_decimal_literal(self):
        lit = Literal.decimal(13.5)
        assert lit.numeric() == 13.5
        assert lit.time() is None
        with pytest.raises(DomainError):
            Literal.decimal(float("nan"))
        with pytest.raises(DomainError):
            Literal.decimal("abc")

    def test_datetime_literal(self):
        lit = Literal.date_time(parse_utc("2012-01-02T12:00:00Z"))
        assert lit.lexical == "2012-01-02T12:00:00Z"
        assert lit.time() == parse_utc("2012-01-02T12:00:00Z")
        assert lit.numeric() is None

    def test_triple_type_checks(self):
        with pytest.raises(DomainError):
            Triple(Literal.string("x"), IRI("urn:p"), IRI("urn:o"))
        with pytest.raises(DomainError):
            Triple(IRI("urn:s"), IRI("urn:p"), "bare string")

    def test_encode_round_trip(self):
        terms = [
            IRI("http://example.org/x"),
            Literal.decimal(23.3),
            Literal.date_time(parse_utc("2012-01-02T12:00:00Z")),
            Literal.string('tricky "quoted"\ttabbed\nnewlined\\slashed'),
        ]
        for term in terms:
            assert decode_term(encode_term(term)) == term

    @given(st.text(max_size=60))
    def test_string_literal_round_trip(self, text):
        term = Literal.string(text)
        line = encode_quad("urn:g", Triple(IRI("urn:s"), IRI("urn:p"), term))
        context, triple = decode_quad(line)
        assert context == "urn:g"
        assert triple.o == term


class TestObservationsToGraph:
    def test_single_observation_six_triples(self):
        graph = observations_to_graph([obs("2012-01-02T03:50:00Z", AT, "AT_1", "SN_1", 13.5)])
        assert len(graph) == 6
        predicates = {t.p.value for t in graph.triples}
        assert predicates == {
            vocab.SSN_OBSERVED_PROPERTY,
            vocab.SSN_OBSERVATION_SAMPLING_TIME,
            vocab.DUL_UNIT_OF_MEASURE,
            vocab.SSN_OBSERVED_BY,
            vocab.SSN_HAS_VALUE,
            vocab.SSN_DEPLOYED_ON_PLATFORM,
        }
        objects = {t.o for t in graph.triples}
        assert IRI(vocab.CF_AIR_TEMPERATURE) in objects
        assert IRI(vocab.UNIT_DEGREE_CELSIUS) in objects
        assert Literal.decimal(13.5) in objects
        assert IRI(vocab.node_iri("SN_1")) in objects

    def test_two_times_same_sensor_eleven_triples(self):
        graph = observations_to_graph(
            [
                obs("2012-01-02T03:50:00Z", AT, "AT_1", "SN_1", 13.5),
                obs("2012-01-02T04:00:00Z", AT, "AT_1", "SN_1", 13.9),
            ]
        )
        assert len(graph) == 11  # deployedOnPlatform deduplicated

    def test_empty_batch_rejected(self):
        with pytest.raises(DomainError, match="empty"):
            observations_to_graph([])

    def test_mixed_properties_rejected(self):
        with pytest.raises(DomainError, match="mixes"):
            observations_to_graph(
                [
                    obs("2012-01-02T03:50:00Z", AT, "AT_1", "SN_1", 13.5),
                    obs("2012-01-02T03:50:00Z", WS, "WS_1", "SN_1", 3.0),
                ]
            )

    def test_time_extrema(self):
        graph = observations_to_graph(
            [
                obs("2012-01-02T05:10:00Z", AT, "AT_1", "SN_1", 14.0),
                obs("2012-01-02T03:50:00Z", AT, "AT_1", "SN_1", 13.5),
            ]
        )
        lo, hi = graph_time_extrema(graph)
        assert lo == parse_utc("2012-01-02T03:50:00Z")
        assert hi == parse_utc("2012-01-02T05:10:00Z")


class TestRepositorySet:
    def test_store_and_catalog(self, tmp_path):
        repos = RepositorySet(tmp_path / "db")
        batch = [
            obs("2012-01-02T03:50:00Z", AT, "AT_1", "SN_1", 13.5),
            obs("2012-01-02T05:10:00Z", AT, "AT_1", "SN_1", 15.0),
        ]
        context = repos.store_graph(batch, AT)
        assert context.startswith("urn:graph:air_temperature:20120102T035000Z:")
        assert len(repos.catalog) == 1
        entry = repos.catalog[0]
        assert entry.repository_id == "air_temperature"
        assert entry.min_time == parse_utc("2012-01-02T03:50:00Z")
        assert entry.max_time == parse_utc("2012-01-02T05:10:00Z")

    def test_routing_by_property(self, tmp_path):
        repos = RepositorySet(tmp_path / "db")
        repos.store_graph([obs("2012-01-02T03:50:00Z", WS, "WS_1", "SN_1", 3.0)], WS)
        assert len(repos.repositories["wind_speed"]) == 1
        assert len(repos.repositories["air_temperature"]) == 0

    def test_mismatched_batch_property(self, tmp_path):
        repos = RepositorySet(tmp_path / "db")
        with pytest.raises(DomainError):
            repos.store_graph([obs("2012-01-02T03:50:00Z", WS, "WS_1", "SN_1", 3.0)], AT)

    def test_persist_failure_keeps_catalog_clean(self, tmp_path, monkeypatch):
        repos = RepositorySet(tmp_path / "db")
        repos.store_graph([obs("2012-01-02T03:50:00Z", AT, "AT_1", "SN_1", 13.5)], AT)

        calls = {"n": 0}
        original = RepositorySet._append_lines

        def flaky(self, path, lines):
            calls["n"] += 1
            raise OSError("disk full")

        monkeypatch.setattr(RepositorySet, "_append_lines", flaky)
        with pytest.raises(OSError):
            repos.store_graph([obs("2012-01-02T04:00:00Z", AT, "AT_1", "SN_1", 14.0)], AT)
        assert len(repos.catalog) == 1
        assert len(repos.repositories["air_temperature"]) == 1

        # also fail on the catalog append, after quads hit the disk
        def catalog_flaky(self, path, lines):
            if path.name == "catalog.tsv":
                raise OSError("disk full")
            return original(self, path, lines)

        monkeypatch.setattr(RepositorySet, "_append_lines", catalog_flaky)
        with pytest.raises(OSError):
            repos.store_graph([obs("2012-01-02T04:10:00Z", AT, "AT_1", "SN_1", 14.0)], AT)
        assert len(repos.catalog) == 1

        # the orphaned quads are pruned when the store reopens
        monkeypatch.setattr(RepositorySet, "_append_lines", original)
        reopened = RepositorySet(tmp_path / "db")
        assert len(reopened.catalog) == 1
        assert reopened.triple_count() == repos.triple_count()

    def test_reload_round_trip(self, tmp_path):
        repos = RepositorySet(tmp_path / "db")
        repos.store_graph(
            [
                obs("2012-01-02T03:50:00Z", AT, "AT_1", "SN_1", 13.5),
                obs("2012-01-02T04:00:00Z", AT, "AT_2", "SN_2", 12.1),
            ],
            AT,
        )
        repos.store_graph([obs("2012-01-02T03:50:00Z", RH, "RH_1", "SN_1", 85.0)], RH)
        reopened = RepositorySet(tmp_path / "db")
        assert reopened.catalog == repos.catalog
        for repo_id in repos.repo_ids():
            assert set(reopened.repositories[repo_id]) == set(repos.repositories[repo_id])
            for context, graph in repos.repositories[repo_id].items():
                assert reopened.repositories[repo_id][context].triples == graph.triples

    def test_mode_mismatch_rejected(self, tmp_path):
        RepositorySet(tmp_path / "db", mode="multi")
        with pytest.raises(DomainError, match="mode"):
            RepositorySet(tmp_path / "db", mode="single")

    def test_single_mode_routing(self, tmp_path):
        repos = RepositorySet(tmp_path / "db", mode="single")
        repos.store_graph([obs("2012-01-02T03:50:00Z", AT, "AT_1", "SN_1", 13.5)], AT)
        repos.store_graph([obs("2012-01-02T03:50:00Z", RH, "RH_1", "SN_1", 85.0)], RH)
        assert set(repos.repositories) == {"single"}
        assert len(repos.repositories["single"]) == 2
        # property routing is disabled: a lookup returns both graphs
        window = TimeRange(parse_utc("2012-01-02T03:00:00Z"), parse_utc("2012-01-02T05:00:00Z"))
        assert len(repos.catalog_lookup(AT, window)) == 2

    def test_clear_fwi(self, tmp_path):
        repos = RepositorySet(tmp_path / "db")
        repos.store_graph([obs("2012-01-02T03:50:00Z", AT, "AT_1", "SN_1", 13.5)], AT)
        event = IRI(vocab.EVENT_BASE + "e1")
        repos.store_fwi_graph(
            [
                Triple(event, IRI(vocab.PROV_AT_TIME), Literal.date_time(parse_utc("2012-01-02T03:50:00Z"))),
                Triple(event, IRI(vocab.RDF_TYPE), IRI(vocab.FWI + "Mid-High")),
            ]
        )
        assert len(repos.fwi_entries()) == 1
        repos.clear_fwi()
        assert repos.fwi_entries() == []
        assert len(repos.catalog) == 1
        reopened = RepositorySet(tmp_path / "db")
        assert reopened.fwi_entries() == []
        assert len(reopened.catalog) == 1


class TestCatalogLookup:
    def fill(self, tmp_path):
        repos = RepositorySet(tmp_path / "db")
        for day in (2, 3, 4):
            batch = [
                obs(f"2012-01-0{day}T00:00:00Z", AT, "AT_1", "SN_1", 13.5),
                obs(f"2012-01-0{day}T23:50:00Z", AT, "AT_1", "SN_1", 15.0),
            ]
            repos.store_graph(batch, AT)
        return repos

    def test_disjoint_window_empty(self, tmp_path):
        repos = self.fill(tmp_path)
        window = TimeRange(parse_utc("2012-02-01T00:00:00Z"), parse_utc("2012-02-02T00:00:00Z"))
        assert repos.catalog_lookup(AT, window) == []

    def test_exact_window_single(self, tmp_path):
        repos = self.fill(tmp_path)
        window = TimeRange(parse_utc("2012-01-03T00:00:00Z"), parse_utc("2012-01-03T23:50:01Z"))
        entries = repos.catalog_lookup(AT, window)
        assert len(entries) == 1
        assert entries[0].min_time == parse_utc("2012-01-03T00:00:00Z")

    def test_straddling_window_two(self, tmp_path):
        repos = self.fill(tmp_path)
        window = TimeRange(parse_utc("2012-01-02T12:00:00Z"), parse_utc("2012-01-03T12:00:00Z"))
        entries = repos.catalog_lookup(AT, window)
        assert len(entries) == 2

    def test_window_end_exclusive(self, tmp_path):
        repos = self.fill(tmp_path)
        # window ends exactly at day 3's min time: not an intersection
        window = TimeRange(parse_utc("2012-01-02T23:50:01Z"), parse_utc("2012-01-03T00:00:00Z"))
        entries = repos.catalog_lookup(AT, window)
        assert len(entries) == 0

    @given(st.data())
    @settings(max_examples=40, deadline=None)
    def test_brute_force_interval_oracle(self, data):
        base = parse_utc("2012-01-01T00:00:00Z")
        entries = []
        for i in range(data.draw(st.integers(1, 12))):
            lo = data.draw(st.integers(0, 500))
            hi = lo + data.draw(st.integers(0, 100))
            entries.append(
                CatalogEntry(
                    "air_temperature",
                    f"urn:graph:air_temperature:x:{i}",
                    base + timedelta(minutes=10 * lo),
                    base + timedelta(minutes=10 * hi),
                    "air_temperature",
                )
            )
        qlo = data.draw(st.integers(0, 600))
        qhi = qlo + 1 + data.draw(st.integers(0, 100))
        window = TimeRange(base + timedelta(minutes=10 * qlo), base + timedelta(minutes=10 * qhi))
        expected = [
            e for e in entries if e.min_time < window.end and e.max_time >= window.start
        ]
        assert [e for e in entries if e.intersects(window)] == expected


def pattern_index(csv_text):
    graphs = []
    for kind in (AT, RH, WS):
        batch = [o for o in parse_csv(csv_text, utc_offset_minutes=0) if o.property is kind]
        if batch:
            graphs.append(observations_to_graph(batch, context=f"urn:test:{kind.csv_name}"))
    return TripleIndex(graphs)


def high_rule_patterns():
    """The 18-pattern observation join for the three-property box rule."""
    patterns = []
    for tag, cf_iri, unit_iri_ in (
        ("RH", vocab.CF_RELATIVE_HUMIDITY, vocab.UNIT_PERCENT),
        ("WS", vocab.CF_WIND_SPEED, vocab.UNIT_METER_PER_SECOND),
        ("AT", vocab.CF_AIR_TEMPERATURE, vocab.UNIT_DEGREE_CELSIUS),
    ):
        ob = Var(f"{tag}_OB1")
        sensor = Var(f"{tag}_Sensor1")
        patterns += [
            (ob, IRI(vocab.SSN_OBSERVED_PROPERTY), IRI(cf_iri)),
            (ob, IRI(vocab.SSN_OBSERVATION_SAMPLING_TIME), Var("T")),
            (ob, IRI(vocab.DUL_UNIT_OF_MEASURE), IRI(unit_iri_)),
            (ob, IRI(vocab.SSN_OBSERVED_BY), sensor),
            (sensor, IRI(vocab.SSN_DEPLOYED_ON_PLATFORM), Var("node")),
            (ob, IRI(vocab.SSN_HAS_VALUE), Var(f"{tag}_OB1V")),
        ]
    return patterns


def high_rule_filters():
    return [
        Comparison("RH_OB1V", ">=", 80.0),
        Comparison("RH_OB1V", "<=", 100.0),
        Comparison("WS_OB1V", ">=", 17.5),
        Comparison("WS_OB1V", "<=", 24.4),
        Comparison("AT_OB1V", ">=", 32.0),
        Comparison("AT_OB1V", "<=", 41.0),
    ]


class TestMatchBgp:
    def test_worked_example_single_binding(self, fig_csv):
        index = pattern_index(fig_csv)
        bindings = match_bgp(index, high_rule_patterns(), high_rule_filters())
        assert len(bindings) == 1
        binding = bindings[0]
        assert binding["node"] == IRI(vocab.node_iri("SN_1"))
        assert binding["T"] == Literal.date_time(parse_utc("2012-01-02T12:00:00Z"))
        assert binding["RH_OB1V"].numeric() == 85.0

    def test_filter_excludes(self, fig_csv):
        index = pattern_index(fig_csv)
        filters = high_rule_filters()[:-2] + [
            Comparison("AT_OB1V", ">=", 41.0),
            Comparison("AT_OB1V", "<=", 50.0),
        ]
        assert match_bgp(index, high_rule_patterns(), filters) == []

    def test_two_nodes_two_bindings(self, fig_csv):
        second = fig_csv.replace("SN_1", "SN_2").replace("RH_1", "RH_2") \
            .replace("WS_1", "WS_2").replace("AT_1", "AT_2")
        index = pattern_index(fig_csv + second)
        bindings = match_bgp(index, high_rule_patterns(), high_rule_filters())
        assert len(bindings) == 2
        assert {b["node"].value for b in bindings} == {
            vocab.node_iri("SN_1"),
            vocab.node_iri("SN_2"),
        }

    def test_boundary_values_fire(self):
        csv_text = (
            "2012-01-02 12:00:00, relative_humidity, RH_1, SN_1, 80, %\n"
            "2012-01-02 12:00:00, wind_speed, WS_1, SN_1, 17.5, m/s\n"
            "2012-01-02 12:00:00, air_temperature, AT_1, SN_1, 32, °C\n"
        )
        index = pattern_index(csv_text)
        assert len(match_bgp(index, high_rule_patterns(), high_rule_filters())) == 1

    def test_missing_conjunct_no_binding(self, fig_csv):
        no_wind = "\n".join(l for l in fig_csv.splitlines() if "wind" not in l)
        index = pattern_index(no_wind)
        assert match_bgp(index, high_rule_patterns(), high_rule_filters()) == []

    def test_filter_on_unbound_variable_rejected(self, fig_csv):
        index = pattern_index(fig_csv)
        with pytest.raises(DomainError, match="GHOST"):
            match_bgp(index, high_rule_patterns(), [Comparison("GHOST", ">=", 1.0)])

    def test_non_numeric_term_drops_binding(self):
        s = IRI("urn:s")
        p = IRI("urn:p")
        index = TripleIndex([Triple(s, p, Literal.string("not a number"))])
        assert match_bgp(index, [(Var("x"), p, Var("v"))], [Comparison("v", ">=", 0.0)]) == []

    def test_duplicate_bindings_collapsed(self):
        # two graphs carrying the same triple must not double a binding
        t = Triple(IRI("urn:s"), IRI("urn:p"), Literal.decimal(1.0))
        index = TripleIndex([NamedGraph.of("urn:g1", [t]), NamedGraph.of("urn:g2", [t])])
        assert len(match_bgp(index, [(Var("x"), IRI("urn:p"), Var("v"))])) == 1


def brute_force_match(triples, patterns, filters):
    """Index-free reference evaluator: scan every triple at every step."""
    triples = list(triples)
    results = []

    def extend(i, binding):
        if i == len(patterns):
            if all(f.holds(binding[f.var]) for f in filters):
                results.append(dict(binding))
            return
        s, p, o = patterns[i]
        for t in triples:
            b = dict(binding)
            ok = True
            for part, val in ((s, t.s), (p, t.p), (o, t.o)):
                if isinstance(part, Var):
                    if part.name in b:
                        if b[part.name] != val:
                            ok = False
                            break
                    else:
                        b[part.name] = val
                elif part != val:
                    ok = False
                    break
            if ok:
                extend(i + 1, b)

    extend(0, {})
    names = sorted({v.name for pat in patterns for v in pat if isinstance(v, Var)})
    seen = set()
    unique = []
    for b in results:
        key = tuple(b[n] for n in names)
        if key not in seen:
            seen.add(key)
            unique.append(b)
    return unique


def enumerate_all_assignments(triples, patterns, filters):
    """Literal |Terms|^|vars| enumeration; only usable on tiny datasets."""
    triples = set(triples)
    terms = set()
    for t in triples:
        terms.update((t.s, t.p, t.o))
    names = sorted({v.name for pat in patterns for v in pat if isinstance(v, Var)})
    hits = []
    for assignment in itertools.product(sorted(terms, key=repr), repeat=len(names)):
        binding = dict(zip(names, assignment))

        def ground(part):
            return binding[part.name] if isinstance(part, Var) else part

        ok = True
        for s, p, o in patterns:
            gs, gp, go = ground(s), ground(p), ground(o)
            if not isinstance(gs, IRI) or not isinstance(gp, IRI) or Triple(gs, gp, go) not in triples:
                ok = False
                break
        if ok and all(f.holds(binding[f.var]) for f in filters):
            hits.append(binding)
    return hits


def binding_set(bindings, names):
    return {tuple(b[n] for n in names) for b in bindings}


class TestMatcherOracles:
    def test_brute_force_agrees_with_enumeration_on_tiny_data(self):
        rng = random.Random(5)
        p1, p2 = IRI("urn:p1"), IRI("urn:p2")
        for _ in range(25):
            triples = set()
            for _ in range(rng.randint(1, 8)):
                s = IRI(f"urn:s{rng.randint(1, 3)}")
                p = rng.choice([p1, p2])
                o = rng.choice([IRI(f"urn:o{rng.randint(1, 2)}"), Literal.decimal(rng.randint(0, 5))])
                triples.add(Triple(s, p, o))
            patterns = [(Var("a"), p1, Var("b")), (Var("b"), p2, Var("c"))]
            filters = []
            names = ["a", "b", "c"]
            expected = binding_set(enumerate_all_assignments(triples, patterns, filters), names)
            actual = binding_set(brute_force_match(triples, patterns, filters), names)
            engine = binding_set(match_bgp(TripleIndex(triples), patterns, filters), names)
            assert actual == expected
            assert engine == expected

    def test_engine_agrees_with_brute_force_on_random_observation_data(self):
        rng = random.Random(11)
        patterns = high_rule_patterns()
        filters = high_rule_filters()
        names = sorted({v.name for pat in patterns for v in pat if isinstance(v, Var)})
        for round_no in range(10):
            lines = []
            for _ in range(rng.randint(3, 30)):
                kind = rng.choice([AT, RH, WS])
                node = rng.randint(1, 3)
                slot = rng.randint(0, 3)
                value = {
                    AT: rng.uniform(20, 50),
                    RH: rng.uniform(60, 100),
                    WS: rng.uniform(10, 30),
                }[kind]
                prefix = {AT: "AT", RH: "RH", WS: "WS"}[kind]
                lines.append(
                    f"2012-01-02 12:{slot}0:00, {kind.csv_name}, {prefix}_{node}, "
                    f"SN_{node}, {value:.1f}, {kind.unit}"
                )
            index = pattern_index("\n".join(lines) + "\n")
            expected = binding_set(brute_force_match(index.triples, patterns, filters), names)
            actual = binding_set(match_bgp(index, patterns, filters), names)
            assert actual == expected
