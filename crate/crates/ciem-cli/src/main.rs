fn main() { println!("ciem cli placeholder"); }
