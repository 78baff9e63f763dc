//! Holds the acceptance suite (`cargo test -p ipos-repro --test acceptance`).
//! It lives in its own package so it runs after every other test target.
