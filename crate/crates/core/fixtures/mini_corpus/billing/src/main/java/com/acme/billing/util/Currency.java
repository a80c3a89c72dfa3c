package com.acme.billing.util;

public enum Currency {
    USD("$"),
    EUR("E");

    private final String symbol;

    Currency(String symbol) {
        this.symbol = symbol;
    }

    public String symbol() {
        return symbol;
    }
}
