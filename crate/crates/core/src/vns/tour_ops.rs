//! Random tour moves on the shelf sequence between the two depot visits.

use rand::Rng;

/// Reverses `route[i..=j]`.
pub fn two_opt_at(route: &[usize], i: usize, j: usize) -> Vec<usize> {
    let mut r = route.to_vec();
    r[i..=j].reverse();
    r
}

/// Exchanges the shelves at positions `i` and `j`.
pub fn swap_at(route: &[usize], i: usize, j: usize) -> Vec<usize> {
    let mut r = route.to_vec();
    r.swap(i, j);
    r
}

/// Moves the shelf at position `i` so that it ends up at position `j`.
pub fn relocate_at(route: &[usize], i: usize, j: usize) -> Vec<usize> {
    let mut r = route.to_vec();
    let v = r.remove(i);
    r.insert(j, v);
    r
}

/// Reverses a random segment that is not the whole route. Routes with
/// fewer than three shelves are returned unchanged.
pub fn two_opt(route: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let n = route.len();
    if n < 3 {
        return route.to_vec();
    }
    loop {
        let i = rng.gen_range(0..n - 1);
        let j = rng.gen_range(i + 1..n);
        if !(i == 0 && j == n - 1) {
            return two_opt_at(route, i, j);
        }
    }
}

/// Swaps two distinct random shelves.
pub fn swap_nodes(route: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let n = route.len();
    if n < 2 {
        return route.to_vec();
    }
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    swap_at(route, i, j)
}

/// Moves a random shelf to a different random position.
pub fn relocate_node(route: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let n = route.len();
    if n < 2 {
        return route.to_vec();
    }
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    relocate_at(route, i, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definitional_examples() {
        let r = [1, 2, 3];
        assert_eq!(two_opt_at(&r, 0, 1), vec![2, 1, 3]);
        assert_eq!(swap_at(&r, 0, 2), vec![3, 2, 1]);
        assert_eq!(relocate_at(&r, 0, 2), vec![2, 3, 1]);
    }

    #[test]
    fn short_routes_unchanged() {
        let mut rng = rand::thread_rng();
        assert_eq!(two_opt(&[4, 5], &mut rng), vec![4, 5]);
        assert_eq!(swap_nodes(&[4], &mut rng), vec![4]);
        assert_eq!(relocate_node(&[], &mut rng), Vec::<usize>::new());
    }
}
