#include "dsr/solver.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace dsr {

namespace {

// MILP adapter around scipy.optimize.milp (HiGHS). Reads CPLEX-LP files,
// writes "status/objective/gap + name value" solution files. --batch solves
// a manifest of lp/sol pairs in one interpreter.
const char* kAdapterScript = R"PY(
import argparse
import sys

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

RELS = ("<=", ">=", "=")


def tokens(line):
    return line.replace("<=", " <= ").replace(">=", " >= ").split()


def parse_terms(toks):
    terms = {}
    const = 0.0
    sign = 1.0
    coef = None
    for tok in toks:
        if tok == "+":
            if coef is not None:
                const += sign * coef
                coef = None
            sign = 1.0
            continue
        if tok == "-":
            if coef is not None:
                const += sign * coef
                coef = None
                sign = -1.0
            else:
                sign = -sign
            continue
        try:
            val = float(tok)
        except ValueError:
            c = sign * (1.0 if coef is None else coef)
            terms[tok] = terms.get(tok, 0.0) + c
            coef = None
            sign = 1.0
            continue
        coef = val if coef is None else coef * val
    if coef is not None:
        const += sign * coef
    return terms, const


def parse_lp(path):
    with open(path) as fh:
        raw = fh.read()
    lines = []
    for line in raw.splitlines():
        s = line.split("\\")[0].strip()
        if s:
            lines.append(s)

    section = None
    maximize = True
    obj_toks = []
    con_lines = []
    bound_lines = []
    integer_names = set()
    done = False
    for s in lines:
        low = s.lower()
        if low in ("maximize", "maximise", "max"):
            section, maximize = "obj", True
            continue
        if low in ("minimize", "minimise", "min"):
            section, maximize = "obj", False
            continue
        if low in ("subject to", "st", "s.t.", "st.", "such that"):
            section = "con"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low in ("binary", "binaries", "bin", "general", "generals", "integers"):
            section = "int"
            continue
        if low == "end":
            done = True
            break
        if section == "obj":
            obj_toks.extend(tokens(s))
        elif section == "con":
            con_lines.append(s)
        elif section == "bounds":
            bound_lines.append(s)
        elif section == "int":
            integer_names.update(s.split())
        else:
            raise ValueError("LP text before any section header: " + s)
    if not done:
        raise ValueError("LP file has no End marker")

    if obj_toks and obj_toks[0].endswith(":"):
        obj_toks = obj_toks[1:]
    elif len(obj_toks) > 1 and obj_toks[1] == ":":
        obj_toks = obj_toks[2:]
    obj, _ = parse_terms(obj_toks)

    cons = []
    for line in con_lines:
        toks = tokens(line)
        if toks and toks[0].endswith(":"):
            toks = toks[1:]
        elif len(toks) > 1 and toks[1] == ":":
            toks = toks[2:]
        rel_pos = [i for i, t in enumerate(toks) if t in RELS]
        if len(rel_pos) != 1:
            raise ValueError("unsupported constraint row: " + line)
        i = rel_pos[0]
        lhs, lc = parse_terms(toks[:i])
        rhs_terms, rc = parse_terms(toks[i + 1:])
        if rhs_terms:
            raise ValueError("variables on constraint rhs: " + line)
        cons.append((lhs, toks[i], rc - lc))

    bounds = {}
    for line in bound_lines:
        toks = tokens(line)
        if len(toks) == 2 and toks[1].lower() == "free":
            bounds[toks[0]] = (-np.inf, np.inf)
        elif len(toks) == 3 and toks[1] in RELS:
            name, lo, hi = toks[0], None, None
            if toks[1] == "<=":
                hi = float(toks[2])
            elif toks[1] == ">=":
                lo = float(toks[2])
            else:
                lo = hi = float(toks[2])
            old = bounds.get(name, (0.0, np.inf))
            bounds[name] = (old[0] if lo is None else lo,
                            old[1] if hi is None else hi)
        elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
            bounds[toks[2]] = (float(toks[0]), float(toks[4]))
        else:
            raise ValueError("unsupported bounds row: " + line)

    names = []
    seen = set()
    for source in ([obj] + [c[0] for c in cons]):
        for n in source:
            if n not in seen:
                seen.add(n)
                names.append(n)
    for n in list(bounds) + sorted(integer_names):
        if n not in seen:
            seen.add(n)
            names.append(n)

    return names, maximize, obj, cons, bounds, integer_names


def solve_one(lp_path, sol_path, time_limit, gap):
    names, maximize, obj, cons, bounds, integer_names = parse_lp(lp_path)
    idx = {n: i for i, n in enumerate(names)}
    n = len(names)

    c = np.zeros(n)
    for name, coef in obj.items():
        c[idx[name]] = coef
    if maximize:
        c = -c

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    for i, name in enumerate(names):
        if name in bounds:
            lo[i], hi[i] = bounds[name]
        elif name in integer_names:
            lo[i], hi[i] = 0.0, 1.0

    constraints = []
    if cons:
        rows, cols, vals = [], [], []
        clo = np.empty(len(cons))
        chi = np.empty(len(cons))
        for r, (terms, rel, rhs) in enumerate(cons):
            for name, coef in terms.items():
                rows.append(r)
                cols.append(idx[name])
                vals.append(coef)
            if rel == "<=":
                clo[r], chi[r] = -np.inf, rhs
            elif rel == ">=":
                clo[r], chi[r] = rhs, np.inf
            else:
                clo[r], chi[r] = rhs, rhs
        a = sparse.csr_matrix((vals, (rows, cols)), shape=(len(cons), n))
        constraints.append(LinearConstraint(a, clo, chi))

    integrality = np.array([1 if name in integer_names else 0 for name in names])
    res = milp(c=c, constraints=constraints, integrality=integrality,
               bounds=Bounds(lo, hi),
               options={"time_limit": time_limit, "mip_rel_gap": gap})

    if res.status == 3:
        sys.stderr.write("model is unbounded: %s\n" % lp_path)
        sys.exit(3)

    with open(sol_path, "w") as out:
        if res.status == 2:
            out.write("status infeasible\n")
            return
        if res.status == 0:
            status = "optimal"
        elif res.x is not None:
            status = "feasible"
        else:
            status = "timeout"
        out.write("status %s\n" % status)
        if res.x is None:
            return
        objective = float(np.dot(c, res.x))
        if maximize:
            objective = -objective
        out.write("objective %.17g\n" % objective)
        out.write("gap %.17g\n" % (getattr(res, "mip_gap", 0.0) or 0.0))
        for i, name in enumerate(names):
            out.write("%s %.17g\n" % (name, res.x[i]))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("lp", nargs="?")
    ap.add_argument("sol", nargs="?")
    ap.add_argument("--batch", help="manifest of tab-separated lp/sol pairs")
    ap.add_argument("--time-limit", type=float, default=3000.0)
    ap.add_argument("--gap", type=float, default=1e-4)
    args = ap.parse_args()

    if args.batch:
        with open(args.batch) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                lp, sol = line.split("\t")
                solve_one(lp, sol, args.time_limit, args.gap)
    else:
        if not args.lp or not args.sol:
            ap.error("lp and sol paths are required outside --batch mode")
        solve_one(args.lp, args.sol, args.time_limit, args.gap)


if __name__ == "__main__":
    main()
)PY";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw SolveError("cannot write " + path.string());
  os << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw SolveError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string tail(const std::string& text, size_t max_len = 2000) {
  if (text.size() <= max_len) return text;
  return "..." + text.substr(text.size() - max_len);
}

struct Workspace {
  fs::path dir;
  bool owned = false;

  explicit Workspace(const SolverConfig& config) {
    if (!config.artifact_dir.empty()) {
      dir = config.artifact_dir;
      fs::create_directories(dir);
    } else {
      std::string tmpl = (fs::temp_directory_path() / "dsr-solve-XXXXXX").string();
      if (!mkdtemp(tmpl.data())) throw SolveError("mkdtemp failed");
      dir = tmpl;
      owned = !config.keep_artifacts;
    }
  }
  ~Workspace() {
    if (owned) {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  }
};

std::string substitute(std::string cmd, const std::string& lp,
                       const std::string& sol, const SolverConfig& config) {
  auto replace_all = [&](const std::string& key, const std::string& value) {
    for (size_t pos = 0; (pos = cmd.find(key, pos)) != std::string::npos;
         pos += value.size())
      cmd.replace(pos, key.size(), value);
  };
  replace_all("{lp}", lp);
  replace_all("{sol}", sol);
  replace_all("{time_limit}", fmt(config.time_limit_s));
  replace_all("{gap}", fmt(config.rel_gap));
  return cmd;
}

std::string builtin_command(const fs::path& dir) {
  fs::path script = dir / "milp_adapter.py";
  if (!fs::exists(script)) write_file(script, kAdapterScript);
  return "python3 " + script.string() +
         " {lp} {sol} --time-limit {time_limit} --gap {gap}";
}

std::string resolve_command(const SolverConfig& config, const fs::path& dir,
                            bool* is_builtin = nullptr) {
  if (is_builtin) *is_builtin = false;
  if (!config.command.empty()) return config.command;
  if (const char* env = std::getenv("DSR_SOLVER_CMD"); env && *env) return env;
  if (is_builtin) *is_builtin = true;
  return builtin_command(dir);
}

void run_shell(const std::string& cmd, const fs::path& log_path) {
  std::string full = cmd + " > " + log_path.string() + " 2>&1";
  int rc = std::system(full.c_str());
  if (rc != 0) {
    std::string log;
    if (fs::exists(log_path)) log = read_file(log_path);
    throw SolveError("solver command failed (exit " + std::to_string(rc) +
                     "): " + cmd + "\n" + tail(log));
  }
}

}  // namespace

SolverConfig solver_preset(const std::string& name) {
  SolverConfig c;
  if (name == "scipy" || name.empty()) return c;
  if (name == "scip") {
    c.command =
        "scip -c \"read {lp}\" -c \"set limits time {time_limit}\" "
        "-c \"set limits gap {gap}\" -c \"optimize\" "
        "-c \"write solution {sol}\" -c \"quit\"";
    return c;
  }
  if (name == "cbc") {
    c.command = "cbc {lp} -seconds {time_limit} -ratioGap {gap} solve "
                "-solution {sol}";
    return c;
  }
  throw SolveError("unknown solver preset: " + name);
}

Assignment solve(const MilpModel& model, const SolverConfig& config,
                 SolveStats* stats) {
  Workspace ws(config);
  fs::path lp = ws.dir / "model.lp";
  fs::path sol = ws.dir / "model.sol";
  write_file(lp, write_lp(model));

  std::string cmd = substitute(resolve_command(config, ws.dir), lp.string(),
                               sol.string(), config);
  auto t0 = std::chrono::steady_clock::now();
  run_shell(cmd, ws.dir / "solver.log");
  auto t1 = std::chrono::steady_clock::now();

  if (!fs::exists(sol))
    throw SolveError("solver produced no solution file: " + cmd);
  Assignment a = read_solution(read_file(sol), model);
  if (stats) {
    stats->wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    stats->lp_path = lp.string();
    stats->sol_path = sol.string();
  }
  return a;
}

std::vector<Assignment> solve_batch(const std::vector<const MilpModel*>& models,
                                    const SolverConfig& config) {
  std::vector<Assignment> out;
  if (models.empty()) return out;

  Workspace ws(config);
  bool builtin = false;
  std::string cmd = resolve_command(config, ws.dir, &builtin);
  if (!builtin) {
    for (const MilpModel* m : models) out.push_back(solve(*m, config));
    return out;
  }

  std::ostringstream manifest;
  std::vector<fs::path> sols;
  for (size_t i = 0; i < models.size(); ++i) {
    fs::path lp = ws.dir / ("m" + std::to_string(i) + ".lp");
    fs::path sol = ws.dir / ("m" + std::to_string(i) + ".sol");
    write_file(lp, write_lp(*models[i]));
    manifest << lp.string() << '\t' << sol.string() << '\n';
    sols.push_back(sol);
  }
  fs::path mf = ws.dir / "manifest.tsv";
  write_file(mf, manifest.str());

  SolverConfig batch_cfg = config;
  std::string batch_cmd = "python3 " + (ws.dir / "milp_adapter.py").string() +
                          " --batch " + mf.string() +
                          " --time-limit {time_limit} --gap {gap}";
  run_shell(substitute(batch_cmd, "", "", batch_cfg), ws.dir / "solver.log");

  for (size_t i = 0; i < models.size(); ++i) {
    if (!fs::exists(sols[i]))
      throw SolveError("batch solve produced no solution for model " +
                       std::to_string(i));
    out.push_back(read_solution(read_file(sols[i]), *models[i]));
  }
  return out;
}

}  // namespace dsr
