package com.acme.billing.payment;

import com.acme.billing.util.Money;

public class CardPayment implements PaymentGateway {
    private final String merchantKey;

    public CardPayment(String merchantKey) {
        this.merchantKey = merchantKey;
    }

    @Override
    public boolean charge(String accountId, Money amount) {
        if (amount.isNegative()) {
            throw new IllegalArgumentException("negative charge");
        }
        return merchantKey.length() > 0;
    }

    @Override
    public String name() {
        return "card";
    }
}
