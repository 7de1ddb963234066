//! Small runs of the three benchmarks, printed as CSV.

use medshare::harness::{bench_communication, bench_encryption, bench_latency, rows_to_csv};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kb = 1024;
    print!("{}", rows_to_csv(&bench_encryption(&[64 * kb, 128 * kb, 256 * kb, 512 * kb], 5, 1)?)?);
    println!();
    print!("{}", rows_to_csv(&bench_communication(&[1, 2, 4, 8], 4 * kb, 1)?)?);
    println!();
    print!("{}", rows_to_csv(&bench_latency(&[1, 2, 5], 0, 4 * kb, 2, 1)?)?);
    Ok(())
}
