//! The 27 DJIA constituents used in the empirical study and their sectors.

/// `(ticker, name, sector code, sector name)`, grouped by sector.
pub const DJIA27: [(&str, &str, &str, &str); 27] = [
    ("VZ", "Verizon", "COM", "Communication Services"),
    ("CVX", "Chevron", "ENE", "Energy"),
    ("AXP", "American Express Company", "FIN", "Financial"),
    ("GS", "Goldman Sachs", "FIN", "Financial"),
    ("JPM", "JPMorgan Chase", "FIN", "Financial"),
    ("JNJ", "Johnson & Johnson", "HLC", "Health Care"),
    ("MRK", "Merck", "HLC", "Health Care"),
    ("PFE", "Pfizer", "HLC", "Health Care"),
    ("UNH", "UnitedHealth", "HLC", "Health Care"),
    ("BA", "Boeing", "IND", "Industrials"),
    ("CAT", "Caterpillar", "IND", "Industrials"),
    ("GE", "General Electric", "IND", "Industrials"),
    ("MMM", "3M Co", "IND", "Industrials"),
    ("UTX", "United Technologies", "IND", "Industrials"),
    ("XOM", "XOMA Corp", "MAT", "Basic Materials"),
    ("KO", "Coca-Cola", "NCY", "Consumer Goods"),
    ("PG", "Procter & Gamble", "NCY", "Consumer Goods"),
    ("AAPL", "Apple", "TEC", "Technology"),
    ("CSCO", "Cisco", "TEC", "Technology"),
    ("IBM", "IBM", "TEC", "Technology"),
    ("INTC", "Intel", "TEC", "Technology"),
    ("MSFT", "Microsoft", "TEC", "Technology"),
    ("DIS", "Disney", "YCY", "Consumer Cyclical"),
    ("HD", "Home Depot", "YCY", "Consumer Cyclical"),
    ("MCD", "McDonalds", "YCY", "Consumer Cyclical"),
    ("NKE", "Nike", "YCY", "Consumer Cyclical"),
    ("WMT", "Wal-Mart", "YCY", "Consumer Cyclical"),
];

pub fn sector_of(ticker: &str) -> Option<&'static str> {
    DJIA27.iter().find(|r| r.0 == ticker).map(|r| r.2)
}

/// Sector codes for `tickers`, `None` for names outside the table.
pub fn sector_map(tickers: &[String]) -> Vec<Option<String>> {
    tickers.iter().map(|t| sector_of(t).map(String::from)).collect()
}

/// The first `k` tickers of the table.
pub fn tickers(k: usize) -> Vec<String> {
    DJIA27.iter().take(k).map(|r| r.0.to_string()).collect()
}
