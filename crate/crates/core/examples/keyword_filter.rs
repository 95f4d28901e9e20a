//! Screens commit messages with the default lexicon and with a custom one.
//!
//!     cargo run --example keyword_filter

use weaknessminer::secfilter::{keyword_filter, KeywordFilter, KeywordLexicon};

fn main() -> weaknessminer::Result<()> {
    let messages = [
        ("a1", "Fix XSS in the lobby chat renderer"),
        ("a2", "patch vulnerability in save-file loader"),
        ("a3", "Merge branch 'bugfix/teleport'"),
        ("a4", "add grab gesture"),
        ("a5", "resolve sql injection in leaderboard query"),
    ];

    let default = KeywordFilter::new(&KeywordLexicon::default())?;
    for (hash, msg) in messages {
        let v = keyword_filter(hash, msg, &default);
        println!(
            "{hash} security={:<5} matched={:?} excluded={:?}  {msg}",
            v.is_security, v.matched_terms, v.exclusion_hits
        );
    }

    let custom = KeywordLexicon::parse(
        "[remedial]\nfix\nharden\n[weakness]\nleak\n[types]\nbuffer overflow\n[exclude]\nmerge\n",
    )?;
    let custom = KeywordFilter::new(&custom)?;
    let v = keyword_filter("b1", "harden save loader against buffer overflow", &custom);
    println!("custom lexicon: {v:?}");
    Ok(())
}
