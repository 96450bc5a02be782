//! Regenerate the golden files under `fixtures/`.
//!
//! Everything here is seeded, so reruns are byte-identical; the fixtures are
//! committed and the CLI tests read them directly.

use std::fs;
use std::path::PathBuf;

use num_complex::Complex64 as C64;

use icokit::channel::ClassicalChannel;
use icokit::explore::deterministic_parity_erasure_census;
use icokit::io::{census_csv, ClassicalChannelFile, OperatorFile};
use icokit::label::SystemLabel;
use icokit::operator::{choi_identity, choi_measure_prepare, CMatrix, LabeledOperator};
use icokit::process::{random_ordered_process, PartyDims, PartySignature};

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    fs::create_dir_all(&dir).expect("fixtures dir");
    let write_op = |name: &str, op: &LabeledOperator| {
        OperatorFile::from_operator(op)
            .write(dir.join(name))
            .expect(name);
    };

    let qubit = PartyDims { d_a: 2, d_x: 2 };
    let sig = PartySignature::new(vec![qubit, qubit]);

    // Maximally noisy two-party process: every input is replaced by the
    // maximally mixed state and the outputs are discarded.
    let uniform = LabeledOperator::identity(sig.space()).scale(C64::new(0.25, 0.0));
    write_op("uniform_noise.json", &uniform);

    // Seeded causally ordered circuit threading party 1 into party 2.
    let comb = random_ordered_process(&sig, &[1, 2], 11).expect("comb");
    write_op("comb.json", comb.operator());

    // Swap: each party's output becomes the other party's input, so the
    // joint parity survives. Not a valid process.
    let swap = choi_identity(SystemLabel::x(2, 2), SystemLabel::a(1, 2))
        .unwrap()
        .tensor(&choi_identity(SystemLabel::x(1, 2), SystemLabel::a(2, 2)).unwrap())
        .unwrap()
        .canonicalized();
    write_op("swap.json", &swap);

    // One-party loop handing the party its own output back.
    let feedback = choi_identity(SystemLabel::x(1, 2), SystemLabel::a(1, 2)).unwrap();
    write_op("identity_feedback.json", &feedback);

    // Identity local operations, one per party, for `apply` demos.
    for party in 1..=2 {
        let op = choi_identity(SystemLabel::a(party, 2), SystemLabel::x(party, 2)).unwrap();
        write_op(&format!("op_party{party}.json"), &op);
    }

    // Non-unitary example: trace the input, prepare |0>.
    let mut ground = CMatrix::zeros(2, 2);
    ground[(0, 0)] = C64::new(1.0, 0.0);
    let replace = choi_measure_prepare(
        &CMatrix::identity(2, 2),
        &ground,
        SystemLabel::a(1, 2),
        SystemLabel::x(1, 2),
    )
    .unwrap();
    write_op("op_party1_replace.json", &replace);

    let classical_swap = ClassicalChannel::from_fn(vec![2, 2], vec![2, 2], |a, x| {
        if a[0] == x[1] && a[1] == x[0] {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    ClassicalChannelFile::from_channel(&classical_swap)
        .write(dir.join("classical_swap.json"))
        .expect("classical_swap");

    let one_way = ClassicalChannel::from_fn(vec![2, 2], vec![2, 2], |a, x| {
        if a[1] == x[0] && a[0] == 0 {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    ClassicalChannelFile::from_channel(&one_way)
        .write(dir.join("classical_one_way.json"))
        .expect("classical_one_way");

    let census = deterministic_parity_erasure_census(&[2, 2], &[2, 2]).expect("census");
    fs::write(dir.join("census.csv"), census_csv(&census)).expect("census.csv");

    println!("fixtures written to {}", dir.display());
}
