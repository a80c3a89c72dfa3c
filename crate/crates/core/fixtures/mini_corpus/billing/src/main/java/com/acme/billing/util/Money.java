package com.acme.billing.util;

public class Money {
    private final long cents;

    private Money(long cents) {
        this.cents = cents;
    }

    public static Money zero() {
        return new Money(0);
    }

    public static Money ofCents(long cents) {
        return new Money(cents);
    }

    public Money plus(Money other) {
        return new Money(cents + other.cents);
    }

    public boolean isNegative() {
        return cents < 0;
    }

    public String format(Currency currency) {
        return currency.symbol() + (cents / 100) + "." + (cents % 100);
    }
}
