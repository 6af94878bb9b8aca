import json
import subprocess
import sys

exe, corpus = sys.argv[1], sys.argv[2]
WS = ["--workspace", "workspace.toml"]
failed = 0


def run(args):
    p = subprocess.run([exe, *args], cwd=corpus, capture_output=True, text=True)
    return p.returncode, p.stdout, p.stderr


def check(name, ok, detail=""):
    global failed
    print(("ok   " if ok else "FAIL ") + name + ("" if ok else " - " + detail))
    failed += not ok


rc, out, err = run(["typecheck", "procs/c2.pi", "--env", "envs/clients.env"])
check("typecheck C2 accepts", rc == 0 and out.startswith("accepted"), out + err)

rc, out, err = run(["typecheck", "procs/free_affine.pi", "--env", "envs/free_affine.env", "--alloc", "c"])
check("free on affine rejects with tFree diagnostic", rc == 1 and "[tFree]" in out, out + err)

rc, out, err = run(["typecheck", "procs/does_not_exist.pi"])
check("missing file is a usage error", rc == 2, out + err)

rc, out, err = run(["run", "procs/example31.pi", "--alloc", "c", "--fuel", "2"])
check("released-name run summary", rc == 0 and "rFree -1; rAll +1; total 0" in out, out + err)

rc, out, err = run(["run", "procs/nil.pi", "--emit", "json"])
j = json.loads(out) if rc == 0 else {}
check("nil runs to an empty trace", rc == 0 and j["traces"][0]["steps"] == [] and j["traces"][0]["total_cost"] == 0, out + err)

rc, out, err = run([*WS, "run", "Buff", "--script", "in.txt"])
check("scripted run points to lts", rc == 2 and "lts" in err, out + err)

rc, out, err = run([*WS, "lts", "Buff", "--env", "envs/buffer_ext.env", "--depth", "6", "--emit", "json"])
j = json.loads(out) if rc == 0 else {"edges": []}
edges = {(e["label"].split("(")[0], e["cost"]) for e in j["edges"]}
check("buffer lts has In(in,.)@0 and tau@+1", ("in?", 0) in edges and ("tau", 1) in edges, str(sorted(edges))[:300])

rc, out, err = run(["lts", "procs/nil.pi", "--env", "envs/empty.env", "--emit", "json"])
j = json.loads(out) if rc == 0 else {}
check("nil lts is a single node", rc == 0 and len(j["nodes"]) == 1 and j["edges"] == [], out + err)

rc, out, err = run(["lts", "procs/nil.pi", "--env", "envs/inconsistent.env"])
check("inconsistent observer environment", rc == 2 and "inconsistent" in err and "unique" in err, out + err)

rc, out, err = run([*WS, "bisim", "C1", "C0", "--env", "envs/clients.env", "--credit", "0"])
check("C1 <=0 C0 holds", rc == 0 and "holds" in out, out + err)

rc, out, err = run([*WS, "bisim", "Buff", "eBuff", "--env", "envs/buffer_ext.env", "--credit", "0"])
check("Buff <=0 eBuff refuted with replayed counterexample", rc == 1 and "counterexample (replayed)" in out, out + err)

rc, out, err = run([*WS, "bisim", "C1", "C0", "--env", "envs/clients.env", "--credit", "5", "--credit-cap", "3"])
check("credit above cap is a usage error", rc == 2, out + err)

rc, out, err = run([*WS, "--jobs", "4", "bisim", "C2", "C3", "--env", "envs/clients.env", "--mode", "eq"])
check("C2 =~ C3 holds both ways", rc == 0 and out.splitlines()[0].endswith("holds"), out + err)

sys.exit(1 if failed else 0)
