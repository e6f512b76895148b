"""Slow reference computations used as independent oracles in the tests."""
import math

import numpy as np

from invsig.groups import act
from invsig.hierarchy import layer_simple


def brute_responses(image, template, group):
    """<I, g t> by acting on the template afresh for every element."""
    return np.array([float(np.sum(image.data * act(group, g, template).data)) for g in range(group.order)])


def brute_cdf_pool(values, thresholds, s):
    """(1/V) sum_g 1 / (1 + exp(-(v - theta) / s)) with plain floats."""
    out = []
    for th in thresholds:
        acc = 0.0
        for v in values:
            z = (v - th) / s
            acc += 1.0 / (1.0 + math.exp(-z)) if z > -700 else 0.0
        out.append(acc / len(values))
    return np.array(out)


def brute_layer_simple(mu, bank):
    """nu[g, k] = sum over the template support and channels of mu[g s, c] t[s, c]."""
    group = bank.group
    out = np.zeros((group.order, bank.K))
    for g in range(group.order):
        for k in range(bank.K):
            acc = 0.0
            for j, s in enumerate(bank.support):
                h = int(group.table[g, s])
                for c in range(bank.channels):
                    acc += mu[h, c] * bank.weights[k, j, c]
            out[g, k] = acc
    return out


def brute_complex(simple, window, spec):
    """mu[g, k, n] = (1/V) sum over gG_l of eta_n(nu_k), looping over elements."""
    group = window.group
    G, K = simple.shape
    out = np.zeros((G, K, spec.N))
    for g in range(G):
        members = [int(group.table[g, h]) for h in window.members]
        for k in range(K):
            out[g, k] = spec.eta(simple[members, k]).sum(axis=0) / len(members)
    return out


def foil_layer1(image, config):
    """Averaging over transformed images instead of transformed templates.

    mu(g) = (1/V) sum over gbar in gG_1 of eta(nu(gbar^-1)).  Covariance
    fails for this variant on non-symmetric inputs.
    """
    group = config.window.group
    nu = layer_simple(image, config.bank)
    out = np.zeros((group.order, nu.shape[1], config.pooling.N))
    for g in range(group.order):
        members = [int(group.inverse[group.table[g, h]]) for h in config.window.members]
        out[g] = config.pooling.eta(nu[members]).sum(axis=0) / len(members)
    return out


def foil_covariance_error(image, g, config):
    group = config.window.group
    a = foil_layer1(image, config)
    b = foil_layer1(act(group, g, image), config)
    perm = group.table[group.inverse[g]]
    return float(np.max(np.abs(b - a[perm])))
