"""Independent reference computations used by the tests.

Nothing here imports the code paths it is used to check.
"""

import numpy as np

# (d_row, d_col) in action-index order Up, Down, Left, Right; row 0 is the bottom
DELTAS = [(1, 0), (-1, 0), (0, -1), (0, 1)]


def naive_forward(weights, biases, x):
    """Loop-based dense/ReLU chain with a linear last layer."""
    a = [float(v) for v in x]
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = []
        for i in range(w.shape[0]):
            s = float(b[i])
            for j in range(w.shape[1]):
                s += float(w[i, j]) * a[j]
            z.append(s)
        a = z if k == len(weights) - 1 else [max(v, 0.0) for v in z]
    return np.array(a)


def central_diff(loss, params, h=1e-5, coords=None):
    """Central finite differences of ``loss()`` w.r.t. each array in ``params`` (mutated in place).

    ``coords`` optionally restricts the check to ``[(param_index, flat_index), ...]``;
    returns a list of ``(param_index, flat_index, numeric)``.
    """
    if coords is None:
        coords = [(k, i) for k, p in enumerate(params) for i in range(p.size)]
    out = []
    for k, i in coords:
        flat = params[k].reshape(-1)
        old = flat[i]
        flat[i] = old + h
        up = loss()
        flat[i] = old - h
        down = loss()
        flat[i] = old
        out.append((k, i, (up - down) / (2 * h)))
    return out


def rel_error(analytic, numeric, floor=1e-6):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def value_iteration(width, height, start, goal, obstacles, gamma,
                    step_cost=-1.0, collision_penalty=-10.0, goal_bonus=100.0, tol=1e-10):
    """Optimal state values for the deterministic gridworld (goal absorbing)."""
    obstacles = set(map(tuple, obstacles))

    def move(r, c, a):
        dr, dc = DELTAS[a]
        nr, nc = r + dr, c + dc
        if not (0 <= nr < height and 0 <= nc < width) or (nr, nc) in obstacles:
            return (r, c), step_cost + collision_penalty
        rew = step_cost + (goal_bonus if (nr, nc) == tuple(goal) else 0.0)
        return (nr, nc), rew

    V = np.zeros((height, width))
    while True:
        delta = 0.0
        newV = V.copy()
        for r in range(height):
            for c in range(width):
                if (r, c) in obstacles or (r, c) == tuple(goal):
                    continue
                best = -np.inf
                for a in range(4):
                    (nr, nc), rew = move(r, c, a)
                    cont = 0.0 if (nr, nc) == tuple(goal) else gamma * V[nr, nc]
                    best = max(best, rew + cont)
                newV[r, c] = best
                delta = max(delta, abs(best - V[r, c]))
        V = newV
        if delta < tol:
            break

    def greedy_path_length():
        pos, steps = tuple(start), 0
        while pos != tuple(goal) and steps < width * height * 4:
            vals = []
            for a in range(4):
                (nr, nc), rew = move(*pos, a)
                cont = 0.0 if (nr, nc) == tuple(goal) else gamma * V[nr, nc]
                vals.append(rew + cont)
            pos = move(*pos, int(np.argmax(vals)))[0]
            steps += 1
        return steps

    return V, greedy_path_length()


def replay_collision_count(width, height, obstacles, path, actions):
    """Recount bumps by re-walking ``actions`` from ``path[0]`` against the grid."""
    obstacles = set(map(tuple, obstacles))
    pos, bumps = tuple(path[0]), 0
    for t, a in enumerate(actions):
        dr, dc = DELTAS[a]
        nxt = (pos[0] + dr, pos[1] + dc)
        if not (0 <= nxt[0] < height and 0 <= nxt[1] < width) or nxt in obstacles:
            bumps += 1
            nxt = pos
        if nxt != tuple(path[t + 1]):
            raise AssertionError(f"path disagrees with replay at step {t}")
        pos = nxt
    return bumps
