//! One random pairing turns each user's responses into independent item-vs-item
//! comparisons. Only disagreeing pairs become comparison records.
//!
//! cargo run --example random_pairing

use rasch_pairing::model::{Response, ResponseData};
use rasch_pairing::pairing::{compile_comparisons, random_split, wp_weight};
use rasch_pairing::rng::{stream_rng, Stream};

fn main() -> rasch_pairing::Result<()> {
    // Three users; X = 1 means the user got the item wrong (the item "won").
    let rows = [
        (0, [Some(1), Some(0), Some(0), Some(1), Some(1)]),
        (1, [Some(0), None, Some(1), Some(1), None]),
        (2, [Some(1), Some(1), None, Some(0), Some(0)]),
    ];
    let edges = rows
        .iter()
        .flat_map(|(t, xs)| {
            xs.iter().enumerate().filter_map(move |(i, x)| x.map(|value| Response { user: *t, item: i, value }))
        })
        .collect();
    let data = ResponseData::new(3, 5, edges)?;

    for t in 0..data.n_users() {
        let m_t = data.user_degree(t);
        println!("user {t}: {m_t} responses, weighted-pair weight {:.3}", wp_weight(m_t));
    }

    let split = random_split(&data, &mut stream_rng(7, Stream::Split(0)));
    for p in &split.pairs {
        println!("user {} pairs items ({}, {})", p.user, p.item_i, p.item_j);
    }
    let pc = compile_comparisons(&data, &split)?;
    println!("{} of {} pairs disagree:", pc.total(), split.pairs.len());
    for r in pc.records() {
        let winner = if r.outcome == 1 { r.item_j } else { r.item_i };
        println!("  user {}: item {} vs item {} -> item {winner} wins", r.user, r.item_i, r.item_j);
    }
    Ok(())
}
