#![no_main]

use libfuzzer_sys::fuzz_target;
use partial_ot::io::{parse_plan_triplets, plan_from_triplets, write_plan_triplets};

fuzz_target!(|data: &[u8]| {
    // The first two bytes pick a shape bound; zero means unbounded.
    let (shape, body) = match data {
        [r, c, rest @ ..] if *r > 0 && *c > 0 => (Some((*r as usize % 16 + 1, *c as usize % 16 + 1)), rest),
        [_, _, rest @ ..] => (None, rest),
        _ => return,
    };
    let Ok(triplets) = parse_plan_triplets(body, shape) else {
        return;
    };
    assert!(triplets.iter().all(|t| t.mass.is_finite() && t.mass >= 0.0));
    if let Some((rows, cols)) = shape {
        assert!(triplets.iter().all(|t| t.i < rows && t.j < cols));
        let plan = plan_from_triplets(&triplets, rows, cols).unwrap();
        let mut out = Vec::new();
        write_plan_triplets(&plan, &mut out).unwrap();
        let again = parse_plan_triplets(out.as_slice(), shape).unwrap();
        assert_eq!(
            plan_from_triplets(&again, rows, cols).unwrap().entries(),
            plan.entries()
        );
    }
});
