package com.acme.billing;

import com.acme.billing.util.Money;

public class Subscription {
    private static final String DEFAULT_TIER = "basic";
    private String tier = DEFAULT_TIER;
    private Money monthlyFee;

    public Subscription(String tier, Money monthlyFee) {
        this.tier = tier;
        this.monthlyFee = monthlyFee;
    }

    public String getTier() {
        return tier;
    }

    public Money getMonthlyFee() {
        return monthlyFee;
    }

    public boolean isPremium() {
        return "premium".equals(tier);
    }
}
