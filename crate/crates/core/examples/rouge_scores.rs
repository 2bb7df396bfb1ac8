//! ROUGE-1, ROUGE-2 and ROUGE-L F1 on a few candidate/reference pairs.

use scale_core::eval::score_text;

fn main() {
    let pairs = [
        ("the cat", "the cat sat"),
        ("a b c d", "a x c d"),
        (
            "police killed the gunman",
            "the gunman was killed by police",
        ),
        ("alpha beta", "gamma delta"),
    ];
    println!(
        "{:<28} {:<34} {:>6} {:>6} {:>6}",
        "candidate", "reference", "R-1", "R-2", "R-L"
    );
    for (cand, reference) in pairs {
        let s = score_text(cand, reference);
        println!(
            "{cand:<28} {reference:<34} {:>6.3} {:>6.3} {:>6.3}",
            s.rouge1.f1, s.rouge2.f1, s.rouge_l.f1
        );
    }
}
