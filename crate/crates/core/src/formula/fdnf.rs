use super::{AtomId, Formula, OrKind, World};
use crate::error::{Error, Result};

/// Largest atom count accepted by [`to_fdnf`] unless a caller overrides it.
pub const DEFAULT_FDNF_ATOM_CAP: usize = 16;

/// Full disjunctive normal form over atoms `0..n_atoms`.
///
/// Minterm `i` assigns atom `j` true iff bit `j` of `i` is set; minterms are
/// emitted in increasing `i` as a left-nested `|ME` chain of left-nested
/// conjunctions. An unsatisfiable formula yields `false`.
pub fn to_fdnf(f: &Formula, n_atoms: usize, cap: usize) -> Result<Formula> {
    if n_atoms > cap {
        return Err(Error::CapExceeded {
            what: "FDNF atom",
            requested: n_atoms as u128,
            cap: cap as u128,
        });
    }
    if let Some(max) = f.max_atom() {
        if max.0 >= n_atoms {
            return Err(Error::UnassignedAtom(max.0));
        }
    }
    let mut terms = Vec::new();
    for i in 0..(1u64 << n_atoms) {
        let world = World::from_index(n_atoms, i);
        if f.evaluate(&world)? {
            terms.push(minterm(n_atoms, i));
        }
    }
    Ok(Formula::or_all(OrKind::Me, terms).unwrap_or(Formula::False))
}

fn minterm(n_atoms: usize, index: u64) -> Formula {
    let literals = (0..n_atoms).map(|j| {
        let a = Formula::Atom(AtomId(j));
        if (index >> j) & 1 == 1 {
            a
        } else {
            Formula::not(a)
        }
    });
    Formula::and_all(literals).unwrap_or(Formula::True)
}
