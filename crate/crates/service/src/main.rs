use ekg_service::{serve, ServiceConfig};

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = serve(ServiceConfig::from_env()).await {
        eprintln!("ekg-service: {e}");
        std::process::exit(1);
    }
}
