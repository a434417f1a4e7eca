//! Mint, pay, move and burn one placement token, then rebuild the ledger
//! from its log.

use edgeorch::{fixtures, Account, Ledger, NodeId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut ledger = Ledger::new();
    let minter = Account::origin("orchestrator");
    ledger.authorize_minter(minter.clone(), 0.0);

    let task = fixtures::green_energy_forecasting_task();
    let sponsor = Account::sponsor(&task.id);
    ledger.fund(sponsor.clone(), 1_000, 0.0);

    let (e3, e1): (NodeId, NodeId) = (fixtures::EDGE_3.into(), fixtures::EDGE_1.into());
    let token = ledger.mint(&task, &minter, &e3, sponsor.clone(), 0.0)?;
    let f = token.decode_nft()?;
    println!("token {token}");
    println!(
        "  serial {} cpu {} ram {} MiB storage {} MiB minter {} digest {:016x}",
        f.serial, f.cpu, f.ram_mib, f.storage_mib, f.minter, f.digest
    );

    // Thirty seconds of running time at 2 units/s must be paid before the move.
    println!("charged {}", ledger.accrue_and_settle(&token, 30.0, 2.0, 30.0)?);
    ledger.transfer(&token, &e3, &e1, 30.0)?;
    ledger.accrue_and_settle(&token, 90.0, 2.0, 90.0)?;
    ledger.burn(&token, &e1, 90.0)?;

    for e in ledger.log() {
        println!("  #{:<2} t={:<5} gas {:>6}  {}", e.seq, e.at, e.gas, serde_json::to_string(&e.op)?);
    }
    println!("gas total {}, sponsor balance {}", ledger.gas_total(), ledger.balance(&sponsor));

    let replayed = Ledger::replay(ledger.log())?;
    assert_eq!(replayed, ledger);
    println!("replay matches; invariant violations: {:?}", ledger.check_invariants());
    Ok(())
}
