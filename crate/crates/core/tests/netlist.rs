use dlmnet::experiments::{
    beam_splitter_point, mzi_point, run_cnot_circuit, ExperimentConfig, Streams,
};
use dlmnet::netlist::{
    parse_netlist, parse_syntax, DriveInput, NetlistDocument, Param, PassiveKind, PortRef,
    ProcKind, Statement,
};
use dlmnet::network::{build_beam_splitter, build_cnot_circuit, build_mzi, Network};
use dlmnet::{Alpha, OutputMode, Qubit};
use proptest::prelude::*;

const BS: &str = include_str!("../netlists/beam_splitter.net");
const MZI: &str = include_str!("../netlists/mzi.net");
const CNOT: &str = include_str!("../netlists/cnot_circuit.net");

fn same_structure(a: &Network, b: &Network) {
    assert_eq!(a.nodes(), b.nodes());
    assert_eq!(a.routes(), b.routes());
    assert_eq!(a.taps(), b.taps());
}

fn counts_by_name(rows: &[dlmnet::report::ReportRow], name: &str) -> Vec<u64> {
    rows.iter()
        .find(|r| r.label == name)
        .unwrap()
        .counts
        .clone()
}

#[test]
fn sample_netlists_parse() {
    for text in [BS, MZI, CNOT] {
        let doc = parse_netlist(text).unwrap();
        assert_eq!(parse_netlist(&doc.to_string()).unwrap(), doc);
    }
}

#[test]
fn mzi_netlist_matches_builtin() {
    let doc = parse_netlist(MZI).unwrap();
    for mode in [OutputMode::Deterministic, OutputMode::Stochastic] {
        let cfg = ExperimentConfig {
            mode,
            seed: 5,
            events_per_point: 3000,
            ..doc.config()
        };
        let mut s1 = Streams::new(cfg.seed);
        let from_text = doc
            .build(cfg.alpha, mode, &mut s1.init, s1.slm_seed)
            .unwrap();
        let mut s2 = Streams::new(cfg.seed);
        let mut builtin = build_mzi(cfg.alpha, 60.0, 0.0, mode, &mut s2.init, s2.slm_seed).unwrap();
        same_structure(&from_text, &builtin);

        let rows = doc.run(&cfg).unwrap();
        let p = mzi_point(&mut builtin, &cfg, 60.0, 0.0, 0.0, &mut s2.input).unwrap();
        assert_eq!(counts_by_name(&rows, "n0")[0], p.first.counts[0]);
        assert_eq!(counts_by_name(&rows, "n1")[0], p.first.counts[1]);
        assert_eq!(counts_by_name(&rows, "n2")[0], p.output.counts[0]);
        assert_eq!(counts_by_name(&rows, "n3")[0], p.output.counts[1]);
    }
}

#[test]
fn beam_splitter_netlist_matches_builtin() {
    let doc = parse_netlist(BS).unwrap();
    let cfg = ExperimentConfig {
        seed: 9,
        events_per_point: 2000,
        ..doc.config()
    };
    let mut s = Streams::new(cfg.seed);
    let mut net = build_beam_splitter(cfg.alpha, cfg.mode, &mut s.init, s.slm_seed).unwrap();
    let p = beam_splitter_point(&mut net, &cfg, 0.5, 0.0, 90.0, &mut s.input).unwrap();
    let rows = doc.run(&cfg).unwrap();
    assert_eq!(counts_by_name(&rows, "n0")[0], p.report.counts[0]);
    assert_eq!(counts_by_name(&rows, "n1")[0], p.report.counts[1]);
}

#[test]
fn cnot_netlist_matches_builtin() {
    let doc = parse_netlist(CNOT).unwrap();
    let cfg = ExperimentConfig {
        seed: 21,
        ..doc.config()
    };
    assert_eq!((cfg.events_per_point, cfg.discard_fraction), (200, 0.5));
    let mut s1 = Streams::new(cfg.seed);
    let mut s2 = Streams::new(cfg.seed);
    same_structure(
        &doc.build(cfg.alpha, cfg.mode, &mut s1.init, 0).unwrap(),
        &build_cnot_circuit(cfg.alpha, cfg.mode, &mut s2.init, 0).unwrap(),
    );
    let rows = doc.run(&cfg).unwrap();
    assert_eq!(
        counts_by_name(&rows, "out"),
        run_cnot_circuit(&cfg, true, false).unwrap().counts
    );
}

#[test]
fn parameters_reach_the_machines() {
    let doc =
        parse_netlist(&MZI.replace("param alpha 0.99", "param alpha 0.9\nparam mode stochastic"))
            .unwrap();
    let cfg = doc.config();
    assert_eq!(cfg.alpha, Alpha::new(0.9).unwrap());
    let mut s = Streams::new(0);
    let net = doc.build(cfg.alpha, cfg.mode, &mut s.init, 0).unwrap();
    let bs1 = net.processor("bs1").unwrap();
    assert_eq!(bs1.mode(), OutputMode::Stochastic);
    assert_eq!(bs1.first().alpha(), cfg.alpha);
}

fn name() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_-]{0,6}"
}

fn port() -> impl Strategy<Value = PortRef> {
    (name(), 0usize..8).prop_map(|(n, c)| PortRef {
        node: n,
        channel: c,
    })
}

fn real() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        Just(0.0),
        Just(-0.5),
        any::<i32>().prop_map(f64::from)
    ]
}

fn statement() -> impl Strategy<Value = Statement> {
    prop_oneof![
        (0.001f64..0.999).prop_map(|a| Statement::Param(Param::Alpha(a))),
        any::<u64>().prop_map(|s| Statement::Param(Param::Seed(s))),
        (name(), 1usize..9, 1usize..5).prop_map(|(name, channels, message_len)| {
            Statement::Source {
                name,
                channels,
                message_len,
            }
        }),
        (name(), 0usize..5).prop_map(|(name, k)| Statement::Proc {
            name,
            kind: match k {
                0 => ProcKind::BeamSplitter,
                1 => ProcKind::Hadamard,
                2 => ProcKind::HadamardLift(Qubit::First),
                3 => ProcKind::HadamardLift(Qubit::Second),
                _ => ProcKind::Cnot,
            }
        }),
        (name(), prop::collection::vec(real(), 4)).prop_map(|(name, entries)| Statement::Proc {
            name,
            kind: ProcKind::Custom {
                event_types: 2,
                message_len: 1,
                entries
            }
        }),
        (name(), real(), 1usize..4).prop_map(|(name, deg, channels)| Statement::Passive {
            name,
            kind: PassiveKind::Rotation(deg),
            channels
        }),
        (port(), port()).prop_map(|(from, to)| Statement::Wire { from, to }),
        (name(), prop::collection::vec(port(), 1..4))
            .prop_map(|(name, from)| Statement::Sink { name, from }),
        (name(), port()).prop_map(|(name, on)| Statement::Tap { name, on }),
        (port(), 0.0f64..10.0, real()).prop_map(|(port, weight, deg)| Statement::Drive {
            port,
            weight,
            input: DriveInput::Phase(deg)
        }),
        (port(), prop::collection::vec(real(), 1..4)).prop_map(|(port, v)| Statement::Drive {
            port,
            weight: 1.0,
            input: DriveInput::Payload(v)
        }),
    ]
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(stmts in prop::collection::vec(statement(), 0..12)) {
        // Parameters may appear once each.
        let mut seen = std::collections::HashSet::new();
        let stmts: Vec<Statement> = stmts
            .into_iter()
            .filter(|s| match s {
                Statement::Param(p) => seen.insert(std::mem::discriminant(p)),
                _ => true,
            })
            .collect();
        let doc = NetlistDocument::new(stmts);
        let reparsed = parse_syntax(&doc.to_string()).unwrap();
        prop_assert_eq!(reparsed, doc);
    }

    #[test]
    fn parser_never_panics(text in "[ -~\n]{0,200}") {
        let _ = parse_netlist(&text);
    }
}
