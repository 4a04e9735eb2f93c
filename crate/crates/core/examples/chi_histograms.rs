//! Aggregate chi-angle histograms over a set of structures and print the
//! most populated bins.

use protgen::allatom::AminoAcid;
use protgen::metrics::chi_histograms;
use protgen::synthetic;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data: Vec<_> = (0..20).map(|_| synthetic::random_complex(&[60], &mut rng)).collect();
    let h = chi_histograms(&data, 12)?;
    println!("{} chi angles in {} bins of {:.1}°", h.total(), h.bins(), h.width().to_degrees());
    for aa in [AminoAcid::Leu, AminoAcid::Lys] {
        for k in 0..aa.chi_count() {
            let counts = h.counts(aa, k).unwrap_or_default();
            let row: Vec<String> = counts.iter().map(|c| format!("{c:>4}")).collect();
            println!("{} chi{}  {}", aa.three(), k + 1, row.join(""));
        }
    }
    let tsv = h.to_tsv();
    println!("TSV export: {} lines, header {:?}", tsv.lines().count(), tsv.lines().next().unwrap());
    Ok(())
}
