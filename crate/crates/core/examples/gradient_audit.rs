//! Runs the finite-difference gradient audit and prints its report.

use ontoloss::gradcheck;
use ontoloss::LossConfig;

fn main() -> ontoloss::Result<()> {
    let report = gradcheck::run(&LossConfig::default(), gradcheck::DEFAULT_TRIALS, 0)?;
    println!("{report}");
    report.into_result().map(|_| ())
}
