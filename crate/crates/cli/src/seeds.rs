/// Seed list argument.
#[derive(Clone, Debug)]
pub struct SeedList(pub Vec<u64>);

/// Parses `a..b` or `a..=b` (both inclusive), a comma list, or one seed.
pub fn parse_seed_list(s: &str) -> Result<SeedList, String> {
    parse_seeds(s).map(SeedList)
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}"));
    let seeds = if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi.strip_prefix('=').unwrap_or(hi))?);
        if lo > hi {
            return Err(format!("empty seed range {s}"));
        }
        (lo..=hi).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::parse_seeds;

    #[test]
    fn ranges_are_inclusive() {
        assert_eq!(parse_seeds("0..4").unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(parse_seeds("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds("1, 3,5").unwrap(), vec![1, 3, 5]);
    }

    #[test]
    fn malformed_seeds() {
        assert!(parse_seeds("4..1").is_err());
        assert!(parse_seeds("a..3").is_err());
        assert!(parse_seeds("").is_err());
    }
}
