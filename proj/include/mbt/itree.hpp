#pragma once

// Lazily produced suspended computations: a tree node is either a pure result
// or an event with a continuation from the event's result to the rest of the
// tree. Trees may be infinite; nodes are built on demand and memoized, so
// interpreting an infinite model stays productive as long as every loop
// iteration performs at least one event.
//
// E is the event type of one pipeline stage (a std::variant of event
// structs), X the stage's result union (a std::variant covering every event's
// result type), and R the tree's return type. Construction discipline pairs
// each event with the union alternative it produces; continuations std::get
// the alternative they expect.

#include <functional>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

namespace mbt::itree {

// Return type for trees that never return (infinite server loops). The
// equality exists only so comparison templates instantiate; no value of this
// type can be produced.
struct Never {
    Never() = delete;
    bool operator==(const Never&) const = default;
};

template <class E, class X, class R>
class ITree {
  public:
    using Event = E;
    using Result = X;
    using Ret = R;
    using Cont = std::function<ITree(const X&)>;
    using Thunk = std::function<ITree()>;

    static ITree pure(R value) {
        ITree t;
        t.cell_ = std::make_shared<Cell>(Cell{PureNode{std::move(value)}});
        return t;
    }

    static ITree impure(E event, Cont k) {
        ITree t;
        t.cell_ = std::make_shared<Cell>(Cell{ImpureNode{std::move(event), std::move(k)}});
        return t;
    }

    // Deferred construction; forced (and memoized) on first inspection.
    static ITree defer(Thunk fn) {
        ITree t;
        t.cell_ = std::make_shared<Cell>(Cell{std::move(fn)});
        return t;
    }

    bool is_pure() const { return std::holds_alternative<PureNode>(force()); }

    const R& value() const { return std::get<PureNode>(force()).value; }

    const E& event() const { return std::get<ImpureNode>(force()).event; }

    // Feeds the event's result to the continuation.
    ITree step(const X& x) const { return std::get<ImpureNode>(force()).k(x); }

  private:
    struct PureNode {
        R value;
    };
    struct ImpureNode {
        E event;
        Cont k;
    };
    using Node = std::variant<PureNode, ImpureNode, Thunk>;
    struct Cell {
        Node node;
    };

    const Node& force() const {
        while (auto* thunk = std::get_if<Thunk>(&cell_->node)) {
            ITree next = (*thunk)();
            cell_->node = next.force();  // copy the resolved node; memoizes
        }
        return cell_->node;
    }

    std::shared_ptr<Cell> cell_;
};

template <class E, class X, class R>
ITree<E, X, R> ret(R value) {
    return ITree<E, X, R>::pure(std::move(value));
}

// Single-event tree whose continuation returns the event's result.
template <class E, class X>
ITree<E, X, X> trigger(E event) {
    return ITree<E, X, X>::impure(std::move(event), [](const X& x) { return ITree<E, X, X>::pure(x); });
}

// Grafts k onto every pure leaf of m, preserving laziness.
template <class E, class X, class A, class B>
ITree<E, X, B> bind(ITree<E, X, A> m, std::function<ITree<E, X, B>(const A&)> k) {
    using Out = ITree<E, X, B>;
    return Out::defer([m = std::move(m), k = std::move(k)]() -> Out {
        if (m.is_pure()) return k(m.value());
        return Out::impure(m.event(), [m, k](const X& x) { return bind(m.step(x), k); });
    });
}

// Substitutes each event of m with the tree the handler gives it.
// handler: E -> ITree<F, Y, X>.
template <class F, class Y, class E, class X, class R>
ITree<F, Y, R> interp(std::function<ITree<F, Y, X>(const E&)> handler, ITree<E, X, R> m) {
    using Out = ITree<F, Y, R>;
    return Out::defer([handler = std::move(handler), m = std::move(m)]() -> Out {
        if (m.is_pure()) return Out::pure(m.value());
        return bind<F, Y, X, R>(handler(m.event()),
                                [handler, m](const X& x) { return interp(handler, m.step(x)); });
    });
}

// Stateful interpretation: handler maps (event, state) to a tree yielding
// (state', result); the final tree yields (state, return value).
// handler: (E, S) -> ITree<F, Y, std::pair<S, X>>.
template <class F, class Y, class S, class E, class X, class R>
ITree<F, Y, std::pair<S, R>> interp_state(
    std::function<ITree<F, Y, std::pair<S, X>>(const E&, const S&)> handler, ITree<E, X, R> m,
    S state) {
    using Out = ITree<F, Y, std::pair<S, R>>;
    return Out::defer([handler = std::move(handler), m = std::move(m), state = std::move(state)]() -> Out {
        if (m.is_pure()) return Out::pure({state, m.value()});
        return bind<F, Y, std::pair<S, X>, std::pair<S, R>>(
            handler(m.event(), state), [handler, m](const std::pair<S, X>& sx) {
                return interp_state(handler, m.step(sx.second), sx.first);
            });
    });
}

// Compares two trees on all event/continuation paths down to the given
// depth. Pure leaves must match by == (at any depth); events must match by
// ==; every result the enumerator yields for the observed event is fed to
// both continuations. Depth counts events, so depth 1 sees one event and the
// leaves directly under it. An event for which the enumerator yields no
// results (say, a throw) is compared but not descended into.
template <class E, class X, class R>
bool prefix_bisim(const ITree<E, X, R>& a, const ITree<E, X, R>& b, unsigned depth,
                  const std::function<std::vector<X>(const E&)>& enumerate) {
    if (a.is_pure() != b.is_pure()) return false;
    if (a.is_pure()) return a.value() == b.value();
    if (depth == 0) return true;
    if (!(a.event() == b.event())) return false;
    for (const X& x : enumerate(a.event())) {
        if (!prefix_bisim(a.step(x), b.step(x), depth - 1, enumerate)) return false;
    }
    return true;
}

}  // namespace mbt::itree
