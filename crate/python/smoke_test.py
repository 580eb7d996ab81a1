"""Quick end-to-end check of the otm_money extension module."""

import json

import otm_money as om


def main():
    sim = om.Simulation(seed=7, zeta=32, xi=4, n_otm=128, notes=12)
    alice, bob, carol = 1, 2, 3

    note = sim.issue(alice)
    assert note.zeta == 32 and len(note.unopened) == 32

    at_bob = sim.transfer(note, alice, bob)
    verdict, opened = sim.verify(at_bob, bob)
    assert verdict == "pass", verdict
    assert len(opened) == 4 and len(at_bob.unopened) == 28

    # The classical record alone does not pass.
    copy = at_bob.classical_copy()
    verdict, _ = sim.verify(copy, carol)
    assert verdict.startswith("fail"), verdict

    blob = at_bob.to_bytes()
    decoded = om.Banknote.from_bytes(blob)
    assert decoded.note_id == at_bob.note_id
    assert decoded.to_bytes() == blob

    fresh = sim.redeem(at_bob, bob)
    assert fresh.note_id != decoded.note_id

    sig = sim.sign_bit(fresh, bob, True)
    assert sim.verify_sig(sig)
    assert not sim.verify_sig(sig.flipped())
    assert sim.verify_sig(om.TokenSignature.from_bytes(sig.to_bytes()))

    tokens = [sim.issue(carol) for _ in range(8)]
    sigs = sim.sign_message(tokens, carol, b"\xa5")
    assert [s.beta for s in sigs] == [True, False, True, False, False, True, False, True]
    assert all(sim.verify_sig(s) for s in sigs)

    store = om.QubitStore(seed=1)
    q = store.prepare(True, "X")
    assert store.measure(q, "X") is True

    assert "honest-chain" in om.list_scenarios()
    report = json.loads(om.run_scenario("honest-chain", seed=3))
    assert report["passed"], report["assertions"]

    print(f"otm_money {om.__version__}: smoke test ok")


if __name__ == "__main__":
    main()
