fn main() {
    println!("phi4 experiment runner");
}
